"""Regenerate the example files shipped in src/sgtomo/data."""

from pathlib import Path

from sgtomo.cli import main
from sgtomo.density import make_stretched, make_m_eigenstate
from sgtomo.io import save_axis_set, save_density
from sgtomo.spin import SpinSystem
from sgtomo.states import parse_state
from sgtomo.tomography import default_axis_set

DATA = Path(__file__).resolve().parents[1] / "src" / "sgtomo" / "data"


def run(*argv):
    code = main([str(a) for a in argv])
    if code:
        raise SystemExit(f"sgtomo {' '.join(map(str, argv))} exited with {code}")


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    spin = SpinSystem(8)
    save_axis_set(DATA / "axes_default_f4.json", default_axis_set(spin))
    save_density(DATA / "stretched_m-4_reference.json", make_stretched(spin, -4), "stretched:-4")
    save_density(DATA / "coherent_60_x_reference.json", parse_state("coherent:60:x", spin), "coherent:60:x")
    save_density(DATA / "m_y0_reference.json", make_m_eigenstate(spin, 0, (0, 1, 0)), "m-eigenstate:0:y")
    run("simulate", "--state", "stretched:-4", "--noise-pop", 0, "--noise-axis-deg", 0,
        "--out", DATA / "stretched_m-4_noiseless.json")
    run("simulate", "--state", "coherent:60:x", "--seed", 2024, "--out", DATA / "coherent_60_x_noisy.json")
    run("simulate", "--state", "m-eigenstate:0:y", "--seed", 5, "--out", DATA / "m_y0_noisy.json")
