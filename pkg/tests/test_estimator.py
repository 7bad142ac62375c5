import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from expandernet import ExpanderNetwork, y_cone


def test_params_and_clone():
    est = ExpanderNetwork(template="tetra-cone", radius=3.0, edge_length=0.2)
    params = est.get_params()
    assert params["template"] == "tetra-cone" and params["radius"] == 3.0
    other = clone(est).set_params(radius=5.0)
    assert other.radius == 5.0 and est.radius == 3.0


def test_fit_y():
    est = ExpanderNetwork(radius=2.0, edge_length=0.25, perturb=0.05, seed=4).fit("y")
    assert est.status_ in ("converged", "stalled")
    assert est.junctions_.n_triple == 1
    assert est.report_.ok
    assert est.score() == pytest.approx(-est.energy_)
    est2 = ExpanderNetwork(radius=2.0, edge_length=0.25, perturb=0.05, seed=4,
                           verify=False).fit(y_cone())
    assert est2.report_ is None
    assert np.array_equal(est.complex_.vertices, est2.complex_.vertices)


def test_schedule():
    est = ExpanderNetwork(radius_schedule=(1.0, 2.0), edge_length=0.25).fit("y")
    assert len(est.states_) == 2 and est.complex_.truncation_radius == 2.0


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ExpanderNetwork().score()


@pytest.mark.parametrize("params,exc", [(dict(radius=-1.0), ValueError),
                                        (dict(edge_length=0), ValueError),
                                        (dict(max_iters=1.5), TypeError),
                                        (dict(template="no-such"), ValueError),
                                        (dict(core_fraction=2.0), ValueError),
                                        (dict(radius_schedule=(2.0, 1.0)), ValueError)])
def test_bad_params(params, exc):
    with pytest.raises(exc):
        ExpanderNetwork(**params).fit("y")


def test_bad_cone():
    with pytest.raises(ValueError):
        ExpanderNetwork().fit("no-such-cone")
    with pytest.raises(TypeError):
        ExpanderNetwork().fit(3)
    # the cross cone is non-regular, which the Y template does not accept
    with pytest.raises(ValueError):
        ExpanderNetwork().fit("cross")
