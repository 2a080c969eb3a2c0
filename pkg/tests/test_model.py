import numpy as np
import pytest

from rbsde2b.lattice import WalkGrid, barrier_layer, terminal_layer
from rbsde2b.model import (
    Absent,
    Functional,
    GeneratorSpec,
    ImplicitExplicitPenalization,
    ImplicitPenalization,
    ItoGeneral,
    Markovian,
    PathFunctional,
    Problem,
    make_scheme,
    validate,
)

from conftest import martingale_problem, abs_generator


def test_table5_has_no_errors_but_warns_about_terminal(table5):
    report = validate(table5, 400)
    assert report.ok
    assert any("terminal value lies outside" in w for w in report.warnings)


def test_terminal_above_upper_barrier_at_minus_one(table5):
    # independent check of the warning's cause: evaluate phi and psi2 on all 401 terminal nodes
    grid = WalkGrid(400, 1.0)
    xi = terminal_layer(table5.terminal, grid)
    upper = barrier_layer(table5.upper, grid, 400, "upper")
    b = grid.b_layer(400)
    k = int(np.argmin(np.abs(b + 1.0)))
    assert b[k] == -1.0
    assert xi[k] == 1.0 and upper[k] == 0.5
    assert np.any(xi > upper)


def test_mu_delta_at_least_one_is_an_error(table5):
    report = validate(table5, 4)
    assert not report.ok
    assert "1.25" in report.errors[0]


def test_estimate_hypothesis_warning():
    # delta*(1+2mu+2mu^2) = 0.1 * 61 >= 1 while mu*delta = 0.5 < 1
    prob = Problem(1.0, abs_generator(), Markovian(np.abs))
    report = validate(prob, 10)
    assert report.ok
    assert any("a-priori" in w for w in report.warnings)


def test_absent_barriers_skip_barrier_checks():
    report = validate(martingale_problem(), 10)
    assert report.ok and not report.warnings


@pytest.mark.parametrize("T", [0.0, -1.0])
def test_nonpositive_horizon(T):
    prob = Problem(T, abs_generator(), Markovian(np.abs))
    assert not validate(prob, 400).ok


@pytest.mark.parametrize("cls", [ImplicitPenalization, ImplicitExplicitPenalization])
@pytest.mark.parametrize("p", [0.0, -3.0])
def test_nonpositive_penalty(table5, cls, p):
    report = validate(table5, 400, cls(p))
    assert any("penalization" in e for e in report.errors)


def test_path_dependent_inputs_need_oracle_mode():
    gen = abs_generator()
    path = Problem(1.0, gen, PathFunctional(lambda paths: paths.max(axis=1)))
    ito = Problem(1.0, gen, Markovian(np.abs), lower=ItoGeneral(-5.0, lambda t, x: x, lambda t, x: 1.0 + 0 * x))
    for prob in (path, ito):
        assert not validate(prob, 400).ok
        assert validate(prob, 20, oracle=True).ok


def test_crossing_barriers_name_the_node():
    prob = Problem(
        1.0, abs_generator(), Markovian(np.abs),
        lower=Functional(lambda t, x: x), upper=Functional(lambda t, x: 0.5 + 0 * x),
    )
    report = validate(prob, 100)
    assert not report.ok
    # first layer with a node above 0.5: b = j/10 > 0.5 first at j = 6, k = 6
    assert "(j=6, k=6)" in report.errors[0]


def test_equal_barriers_are_legal():
    prob = Problem(
        1.0, abs_generator(), Markovian(np.abs),
        lower=Functional(lambda t, x: x), upper=Functional(lambda t, x: x),
    )
    assert validate(prob, 100).ok


def test_lipschitz_probe_warns_on_understated_mu():
    prob = Problem(1.0, GeneratorSpec(abs_generator().g, 1.0), Markovian(np.abs))
    assert any("Lipschitz" in w for w in validate(prob, 400).warnings)


def test_validate_never_raises_on_bad_callables():
    def broken(t, y, z):
        raise RuntimeError("boom")

    prob = Problem(1.0, GeneratorSpec(broken, 1.0), Markovian(np.abs))
    report = validate(prob, 10)
    assert not report.ok


def test_validate_is_deterministic(table5):
    a, b = validate(table5, 400), validate(table5, 400)
    assert a.errors == b.errors and a.warnings == b.warnings


def test_make_scheme():
    assert make_scheme("impexp-pen", 20).p == 20.0
    assert make_scheme("explicit-reflected").name == "explicit-reflected"
    with pytest.raises(ValueError):
        make_scheme("implicit-pen")
    with pytest.raises(ValueError):
        make_scheme("nope")


def test_default_barriers_absent():
    prob = Problem(1.0, abs_generator(), Markovian(np.abs))
    assert prob.lower == Absent() and prob.upper == Absent()
