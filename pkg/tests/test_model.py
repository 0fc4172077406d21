import json

import numpy as np
import pytest

import fluidbm as fb
from fluidbm.errors import AdmissibilityError, ModelError

from conftest import random_recurrent_model

M2_TEXT = json.dumps(
    {"m": 2, "Q": [[-1.0, 1.0], [1.0, -1.0]], "mu": [1.0, -2.0],
     "sigma2": [1.0, 1.0]}
)


def test_load_model_round_trip():
    model = fb.load_model(M2_TEXT)
    assert model.m == 2
    assert np.allclose(model.alpha, [0.5, 0.5], atol=1e-12)
    assert np.allclose(model.mu, [1.0, -2.0])


def test_load_model_rejects_bad_row_sum():
    doc = json.loads(M2_TEXT)
    doc["Q"][0][0] = -0.9  # row sums to 0.1
    with pytest.raises(ModelError, match="row sums"):
        fb.load_model(json.dumps(doc))


def test_load_model_renormalises_rounded_rows():
    doc = json.loads(M2_TEXT)
    doc["Q"][0][0] = -1.0 + 3e-11  # within tolerance; diagonal is adjusted
    model = fb.load_model(json.dumps(doc))
    assert fb.numerics.max_abs(model.Q.sum(axis=1)) <= 1e-15


def test_load_model_rejects_nonpositive_variance():
    doc = json.loads(M2_TEXT)
    doc["sigma2"] = [1.0, 0.0]
    with pytest.raises(ModelError, match="variance"):
        fb.load_model(json.dumps(doc))


def test_load_model_rejects_unknown_keys():
    doc = json.loads(M2_TEXT)
    doc["extra"] = 1
    with pytest.raises(ModelError, match="unknown"):
        fb.load_model(json.dumps(doc))


def test_load_model_rejects_dimension_mismatch():
    doc = json.loads(M2_TEXT)
    doc["mu"] = [1.0]
    with pytest.raises(ModelError):
        fb.load_model(json.dumps(doc))


def test_load_model_rejects_reducible_generator():
    doc = {"m": 2, "Q": [[0.0, 0.0], [1.0, -1.0]], "mu": [-1.0, -1.0],
           "sigma2": [1.0, 1.0]}
    with pytest.raises(ModelError, match="irreducible"):
        fb.load_model(json.dumps(doc))


def test_load_model_rejects_negative_off_diagonal():
    doc = {"m": 2, "Q": [[1.0, -1.0], [-1.0, 1.0]], "mu": [-1.0, -1.0],
           "sigma2": [1.0, 1.0]}
    with pytest.raises(ModelError, match="off-diagonal"):
        fb.load_model(json.dumps(doc))


def test_load_model_rejects_malformed_json():
    with pytest.raises(ModelError, match="JSON"):
        fb.load_model("{not json")


def test_stationary_phase_dist_examples():
    assert np.allclose(fb.stationary_phase_dist([[-1.0, 1.0], [1.0, -1.0]]),
                       [0.5, 0.5], atol=1e-12)
    assert np.allclose(fb.stationary_phase_dist([[0.0]]), [1.0])
    assert np.allclose(fb.stationary_phase_dist([[-2.0, 2.0], [1.0, -1.0]]),
                       [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)


def test_mean_drift_examples(m1, m2):
    assert fb.mean_drift(m2) == pytest.approx(-0.5, abs=1e-14)
    assert fb.mean_drift(m1) == pytest.approx(-1.0, abs=1e-14)
    flipped = fb.MmbmModel(Q=m2.Q, mu=[2.0, -1.0], sigma2=m2.sigma2)
    assert fb.mean_drift(flipped) == pytest.approx(0.5, abs=1e-14)


def test_fluidize_m1(m1):
    fm = fb.fluidize(m1, 8.0)
    assert np.allclose(fm.T, [[-8.0, 8.0], [8.0, -8.0]])
    assert np.allclose(fm.c_plus, [3.0])
    assert np.allclose(fm.c_minus, [-5.0])


def test_fluidize_m2(m2):
    fm = fb.fluidize(m2, 100.0)
    eye = np.eye(2)
    assert np.allclose(fm.Tpp, m2.Q - 100.0 * eye)
    assert np.allclose(fm.Tpm, 100.0 * eye)
    assert np.allclose(fm.Tmp, 100.0 * eye)
    assert np.allclose(fm.Tmm, m2.Q - 100.0 * eye)
    assert np.allclose(fm.c_plus, [11.0, 8.0])
    assert np.allclose(fm.c_minus, [-9.0, -12.0])


def test_fluidize_threshold_boundary_excluded(m1):
    with pytest.raises(AdmissibilityError):
        fb.fluidize(m1, 0.5)  # sqrt(0.5)*sqrt(2) == |mu| exactly
    fb.fluidize(m1, 0.5000001)  # just above passes


def test_fluidize_output_is_valid_fluid_model():
    rng = np.random.default_rng(7)
    for _ in range(10):
        model = random_recurrent_model(rng)
        lam = 4.0 * max(float(np.max(model.mu**2 / model.sigma2)), 1.0)
        fm = fb.fluidize(model, lam)
        assert fb.numerics.max_abs(fm.T.sum(axis=1)) <= 1e-9
        assert np.all(fm.c_plus > 0) and np.all(fm.c_minus < 0)


def test_fluid_phase_dist_is_half_half_tensor_alpha():
    rng = np.random.default_rng(8)
    for _ in range(5):
        model = random_recurrent_model(rng)
        lam = 5.0 * max(float(np.max(model.mu**2 / model.sigma2)), 1.0)
        fm = fb.fluidize(model, lam)
        expected = np.concatenate([0.5 * model.alpha, 0.5 * model.alpha])
        assert np.allclose(fm.stationary_dist(), expected, atol=1e-10)


def test_fluid_mean_drift_matches_mmbm_drift():
    rng = np.random.default_rng(9)
    for _ in range(5):
        model = random_recurrent_model(rng)
        lam = 5.0 * max(float(np.max(model.mu**2 / model.sigma2)), 1.0)
        fm = fb.fluidize(model, lam)
        assert fm.mean_drift() == pytest.approx(fb.mean_drift(model), abs=1e-10)


def test_fluid_model_validation():
    with pytest.raises(ModelError, match="positive"):
        fb.FluidModel(T=[[-1.0, 1.0], [1.0, -1.0]], c_plus=[0.0], c_minus=[-1.0])
    with pytest.raises(ModelError, match="negative"):
        fb.FluidModel(T=[[-1.0, 1.0], [1.0, -1.0]], c_plus=[1.0], c_minus=[1.0])
    with pytest.raises(ModelError):
        fb.FluidModel(T=[[-1.0, 1.0], [1.0, -1.0]], c_plus=[1.0, 1.0],
                      c_minus=[-1.0])


def test_load_fluid_model_reorders_phases():
    text = json.dumps({"T": [[-1.0, 1.0], [2.0, -2.0]], "c": [-1.0, 1.0]})
    fm = fb.load_fluid_model(text)
    # ascending phase (original index 1) comes first after reordering
    assert fm.n_plus == 1 and fm.n_minus == 1
    assert np.allclose(fm.c_plus, [1.0])
    assert np.allclose(fm.T, [[-2.0, 2.0], [1.0, -1.0]])


def test_load_fluid_model_rejects_zero_rate():
    text = json.dumps({"T": [[-1.0, 1.0], [2.0, -2.0]], "c": [0.0, 1.0]})
    with pytest.raises(ModelError, match="zero"):
        fb.load_fluid_model(text)


def test_models_are_immutable(m2, f1):
    with pytest.raises(ValueError):
        m2.Q[0, 0] = 5.0
    with pytest.raises(ValueError):
        f1.c_plus[0] = 2.0
