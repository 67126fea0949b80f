from pathlib import Path

import numpy as np
import pytest

from carnot_ma.specfile import BUILTIN_SPECS, SpecError, parse_spec

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.mark.parametrize("name", BUILTIN_SPECS)
def test_builtin_specs_parse(name):
    spec = parse_spec(name, ["resolution=9"])
    assert spec.problem.name == name
    assert spec.problem.hamiltonian.monotone_in_u


def test_manufactured_builtin_contents():
    spec = parse_spec("heisenberg-gauss-manufactured")
    pr = spec.problem
    assert pr.frame.name == "heisenberg" and pr.grid.shape == (33, 33, 33)
    assert pr.gamma_floor == 1e-3 and spec.solver.tol == 1e-6
    np.testing.assert_allclose(pr.exact_solution().values, pr.boundary_data.values)
    assert spec.compare.pair == "boundary_shift"


def test_zero_gamma_floor_reports_line():
    with pytest.raises(SpecError, match="gamma_floor must be positive") as info:
        parse_spec(FIXTURES / "zero_gamma.ini")
    assert info.value.line == 6 and info.value.key == "gamma_floor"


def test_negative_curvature_cites_positivity():
    with pytest.raises(SpecError, match=r"H must be positive") as info:
        parse_spec(FIXTURES / "negative_k.ini")
    assert info.value.line == 9 and "]0, +inf[" in str(info.value)


def test_frame_file_reference_resolves_relative_to_spec():
    spec = parse_spec(FIXTURES / "framefile_problem.ini")
    assert spec.problem.frame.name == "heisenberg-from-file"


def test_overrides_and_their_errors():
    spec = parse_spec("heisenberg-gauss-manufactured", ["resolution=9, 9, 5", "solver.tol=1e-7", "sweep.mus=1, 2"])
    assert spec.problem.grid.shape == (9, 9, 5)
    assert spec.solver.tol == 1e-7 and spec.sweep.mus == (1.0, 2.0)
    with pytest.raises(SpecError, match="override"):
        parse_spec("heisenberg-gauss-manufactured", ["resolution=abc"])
    with pytest.raises(SpecError, match="key=value"):
        parse_spec("heisenberg-gauss-manufactured", ["resolution"])


def test_bad_specs(tmp_path):
    base = (FIXTURES / "framefile_problem.ini").read_text().replace("heisenberg_file.ini", "heisenberg")
    cases = {
        "kind = gauss_curvature": ("kind = wave", "unknown kind"),
        "frame = heisenberg": ("frame = spaceship", "unknown built-in frame"),
        "boundary = (x1^2 + x2^2)/2": ("boundary = open('x')", "not allowed|only exp"),
        "resolution = 9": ("resolution = 9, 9", "expected 1 or 3 values"),
    }
    for old, (new, msg) in cases.items():
        p = tmp_path / "bad.ini"
        p.write_text(base.replace(old, new))
        with pytest.raises(SpecError, match=msg) as info:
            parse_spec(p)
        assert info.value.line is not None
    p = tmp_path / "extra.ini"
    p.write_text(base + "\n[solver]\ntolerance = 1\n")
    with pytest.raises(SpecError, match="unknown key"):
        parse_spec(p)
    p.write_text("[problem\nname = x\n")
    with pytest.raises(SpecError, match="cannot parse"):
        parse_spec(p)


def test_missing_spec():
    with pytest.raises(SpecError, match="no such spec"):
        parse_spec("does-not-exist")


def test_seed_changes_only_sampling():
    a = parse_spec("euclidean-quadratic", seed=1)
    b = parse_spec("euclidean-quadratic", seed=2)
    assert a.solver.seed == 1 and b.solver.seed == 2
    np.testing.assert_array_equal(a.problem.boundary_data.values, b.problem.boundary_data.values)
