import numpy as np
import pytest

from nnquine import net
from nnquine.numerics import NumericError, SELU_SAT, substream

from oracles import naive_forward, random_setup

TOY = net.NetworkSpec.vanilla(embed_dim=2, hidden_dim=2)      # 2*2+2*2+2 = 10
SMALL = net.NetworkSpec.vanilla(embed_dim=6, hidden_dim=6)    # 78 params
AUX_TOY = net.NetworkSpec.auxiliary(embed_dim=4, hidden_dim=3, coord_embed_dim=2,
                                    image_dim=5, n_classes=3)  # 12+9+3+9 = 33


# ----------------------------------------------------------- layout & spec

def test_param_count_defaults():
    assert net.param_count(net.NetworkSpec.vanilla()) == 20100
    assert net.param_count(net.NetworkSpec.auxiliary()) == 21100
    assert net.param_count(TOY) == 10
    assert net.param_count(AUX_TOY) == 33


def test_param_count_matches_init_length():
    rng = np.random.default_rng(0)
    for _ in range(20):
        e, h = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        spec = net.NetworkSpec.vanilla(embed_dim=e, hidden_dim=h)
        assert net.param_count(spec) == h * e + h * h + h
        assert len(net.init_params(spec, rng)) == net.param_count(spec)


def test_spec_validation():
    with pytest.raises(ValueError):
        net.NetworkSpec(variant="conv")
    with pytest.raises(ValueError):
        net.NetworkSpec(encoding="binary")
    with pytest.raises(ValueError):
        net.NetworkSpec(embed_dim=5, coord_embed_dim=3)  # split mismatch
    with pytest.raises(ValueError):
        net.NetworkSpec(variant="vanilla", embed_dim=4, coord_embed_dim=2,
                        image_embed_dim=2, image_dim=9)
    with pytest.raises(ValueError):
        net.NetworkSpec.auxiliary(n_classes=1)


def test_locate_flatten_corners():
    van = net.NetworkSpec.vanilla()
    assert net.locate(0, van) == ("w1", 0, 0)
    assert net.locate(20099, van) == ("w_out", 99, 0)
    aux = net.NetworkSpec.auxiliary()
    assert net.locate(21099, aux) == ("w_aux", 9, 99)
    with pytest.raises(ValueError):
        net.locate(20100, van)
    with pytest.raises(ValueError):
        net.locate(-1, van)
    with pytest.raises(ValueError):
        net.flatten("w9", 0, 0, van)
    with pytest.raises(ValueError):
        net.flatten("w_out", 100, 0, van)


def test_locate_flatten_bijection_exhaustive():
    mid = net.NetworkSpec.vanilla(embed_dim=20, hidden_dim=10)  # 310 params
    for spec in (TOY, AUX_TOY, SMALL, mid):
        seen = set()
        for c in range(net.param_count(spec)):
            layer, row, col = net.locate(c, spec)
            assert net.flatten(layer, row, col, spec) == c
            seen.add((layer, row, col))
        assert len(seen) == net.param_count(spec)


def test_split_params_views():
    params = np.arange(33, dtype=np.float64)
    w = net.split_params(params, AUX_TOY)
    assert w["w1"].shape == (3, 4) and w["w2"].shape == (3, 3)
    assert w["w_out"].shape == (3,) and w["w_aux"].shape == (3, 3)
    assert w["w1"].base is params  # views, not copies
    assert w["w_out"][0] == 21.0
    with pytest.raises(ValueError):
        net.split_params(np.zeros(34), AUX_TOY)


# ------------------------------------------------------------------- init

def test_init_zero_flag():
    assert not net.init_params(TOY, np.random.default_rng(0), zero=True).any()


def test_init_determinism():
    a = net.init_params(SMALL, substream(5, "init"))
    b = net.init_params(SMALL, substream(5, "init"))
    assert np.array_equal(a, b)


def test_init_default_scales():
    spec = net.NetworkSpec.vanilla()
    params = net.init_params(spec, substream(0, "init"))
    w = net.split_params(params, spec)
    expect = np.sqrt(1.0 / 300.0)  # 0.0577
    assert abs(w["w1"].std() - expect) < 0.004
    assert abs(w["w2"].std() - expect) < 0.004
    assert not w["w_out"].any()  # output head starts at zero


def test_init_aux_head_zero():
    params = net.init_params(net.NetworkSpec.auxiliary(), substream(1, "init"))
    w = net.split_params(params, net.NetworkSpec.auxiliary())
    assert not w["w_out"].any() and not w["w_aux"].any()


def test_init_he_variant_scales():
    spec = net.NetworkSpec.vanilla()
    params = net.init_params(spec, substream(2, "init"), he=True)
    w = net.split_params(params, spec)
    assert 0.13 <= w["w2"].std() <= 0.15  # sqrt(2/100) = 0.1414
    assert w["w_out"].any()


# ------------------------------------------------------------ projections

def test_projections_deterministic():
    a = net.build_projections(SMALL, 9)
    b = net.build_projections(SMALL, 9)
    assert np.array_equal(a.coord, b.coord)
    assert a.seed == 9


def test_projection_coord_variance():
    proj = net.build_projections(net.NetworkSpec.vanilla(), 0)
    assert proj.coord.shape == (20100, 100)
    assert abs(proj.coord.var() - 0.01) < 0.0002  # 1/embed_dim


def test_projection_image_variance():
    proj = net.build_projections(net.NetworkSpec.auxiliary(), 0)
    assert proj.image.shape == (50, 784)
    target = 2.0 / 784.0
    assert abs(proj.image.var() - target) < 0.05 * target


def test_projections_read_only():
    proj = net.build_projections(TOY, 0)
    with pytest.raises(ValueError):
        proj.coord[0, 0] = 1.0


def test_scalar_encoding_stores_column():
    spec = net.NetworkSpec.vanilla(embed_dim=6, hidden_dim=6, encoding=net.SCALAR)
    proj = net.build_projections(spec, 3)
    assert proj.coord.shape == (6,)


# -------------------------------------------------------------- embedding

def test_embed_one_hot_is_row_lookup():
    params, proj = random_setup(SMALL, 1)
    for c in (0, 13, 77):
        assert np.array_equal(net.embed_coordinate(c, proj, SMALL), proj.coord[c])


def test_embed_matches_explicit_one_hot_product():
    proj = net.build_projections(SMALL, 2)
    n = net.param_count(SMALL)
    rng = np.random.default_rng(4)
    for c in rng.integers(0, n, 20):
        onehot = np.zeros(n)
        onehot[c] = 1.0
        assert np.array_equal(onehot @ proj.coord, net.embed_coordinate(int(c), proj, SMALL))


def test_embed_out_of_range():
    proj = net.build_projections(TOY, 0)
    with pytest.raises(ValueError):
        net.embed_coordinate(10, proj, TOY)
    with pytest.raises(ValueError):
        net.embed_batch([0, 11], proj, TOY)


def test_scalar_encoding_formula():
    # h=1, e=9 gives n=11, odd, so the midpoint coordinate lands exactly on 0
    spec = net.NetworkSpec.vanilla(embed_dim=9, hidden_dim=1, encoding=net.SCALAR)
    assert net.param_count(spec) == 11
    proj = net.build_projections(spec, 7)
    mid = net.embed_coordinate(5, proj, spec)
    assert np.array_equal(mid, np.zeros(9))
    first = net.embed_coordinate(0, proj, spec)
    assert np.array_equal(first, -0.5 * proj.coord)
    batch = net.embed_batch([0, 5, 10], proj, spec)
    assert np.array_equal(batch[0], first)
    assert np.array_equal(batch[2], 0.5 * proj.coord)


# ----------------------------------------------------------------- forward

def test_forward_zero_quine_predicts_zero_everywhere():
    proj = net.build_projections(TOY, 0)
    zero = net.init_params(TOY, None, zero=True)
    for c in range(10):
        pred, acts = net.forward_vanilla(zero, proj, c, TOY)
        assert pred == 0.0
        assert not acts["h1"].any() and not acts["h2"].any()


def test_forward_vanilla_matches_naive_bitwise():
    for seed in range(3):
        params, proj = random_setup(TOY, seed)
        for c in range(10):
            pred, _ = net.forward_vanilla(params, proj, c, TOY)
            assert pred == naive_forward(params, proj, c, TOY)


def test_forward_small_matches_naive_bitwise():
    params, proj = random_setup(SMALL, 11)
    for c in (0, 5, 40, 77):
        pred, _ = net.forward_vanilla(params, proj, c, SMALL)
        assert pred == naive_forward(params, proj, c, SMALL)


def test_forward_output_head_is_linear():
    params, proj = random_setup(SMALL, 6)
    doubled = params.copy()
    doubled[72:78] *= 2.0  # w_out block of the 78-param spec
    for c in (3, 30):
        p1, _ = net.forward_vanilla(params, proj, c, SMALL)
        p2, _ = net.forward_vanilla(doubled, proj, c, SMALL)
        assert p2 == 2.0 * p1


def test_forward_overflow_names_layer():
    params, proj = random_setup(SMALL, 8)
    w = net.split_params(params, SMALL)
    # sign-matched huge w1 keeps a1 positive at ~1e200, so h1 ~ 1e200 and the
    # w2 products overflow float64
    w["w1"][:] = 1e200 * np.sign(proj.coord[0])
    w["w2"][:] = 1e200
    with np.errstate(over="ignore"):
        with pytest.raises(NumericError, match="w2"):
            net.forward_vanilla(params, proj, 0, SMALL)


def test_forward_vanilla_rejects_aux_spec():
    params, proj = random_setup(AUX_TOY, 0)
    with pytest.raises(ValueError):
        net.forward_vanilla(params, proj, 0, AUX_TOY)


def test_forward_aux_matches_naive():
    rng = np.random.default_rng(21)
    params, proj = random_setup(AUX_TOY, 21)
    for c in (0, 17, 32):
        image = rng.uniform(0, 1, 5)
        pred, probs, _ = net.forward_aux(params, proj, c, image, AUX_TOY)
        npred, nprobs = naive_forward(params, proj, c, AUX_TOY, image=image)
        assert pred == npred
        assert np.max(np.abs(probs - np.array(nprobs))) < 1e-15


def test_forward_aux_probs_normalized():
    rng = np.random.default_rng(22)
    params, proj = random_setup(AUX_TOY, 22, scale=5.0)
    _, probs, _ = net.forward_aux(params, proj, 1, rng.uniform(0, 1, 5), AUX_TOY)
    assert abs(probs.sum() - 1.0) < 1e-12
    assert np.all(probs >= 0)  # tau=0.01 saturates large logit gaps to exact 0/1


def test_forward_aux_zero_quine_uniform_probs():
    proj = net.build_projections(AUX_TOY, 0)
    zero = np.zeros(33)
    _, probs, _ = net.forward_aux(zero, proj, 4, np.ones(5), AUX_TOY)
    assert np.all(probs == 1.0 / 3.0)


def test_forward_aux_validates_inputs():
    params, proj = random_setup(AUX_TOY, 1)
    with pytest.raises(ValueError):
        net.forward_aux(params, proj, 0, np.ones(4), AUX_TOY)  # bad image shape
    with pytest.raises(ValueError):
        net.forward_batch(params, proj, [0], AUX_TOY, images=np.ones((1, 5)), tau=0.0)


# ------------------------------------------------------------ batched path

def test_forward_batch_strict_independent_of_batching():
    params, proj = random_setup(SMALL, 13)
    coords = np.arange(10, 20)
    batch = net.forward_batch(params, proj, coords, SMALL, strict=True)
    for i, c in enumerate(coords):
        single, _ = net.forward_vanilla(params, proj, c, SMALL)
        assert batch["preds"][i] == single


def test_forward_batch_blas_close_to_strict():
    params, proj = random_setup(net.NetworkSpec.vanilla(embed_dim=30, hidden_dim=20), 14)
    spec = net.NetworkSpec.vanilla(embed_dim=30, hidden_dim=20)
    coords = np.arange(0, 600, 7)
    fast = net.forward_batch(params, proj, coords, spec)["preds"]
    slow = net.forward_batch(params, proj, coords, spec, strict=True)["preds"]
    assert np.allclose(fast, slow, rtol=1e-13, atol=1e-16)


def test_forward_batch_aux_none_means_zero_images():
    params, proj = random_setup(AUX_TOY, 15)
    coords = [0, 7, 21]
    a = net.forward_batch(params, proj, coords, AUX_TOY, strict=True)
    b = net.forward_batch(params, proj, coords, AUX_TOY,
                          images=np.zeros((3, 5)), strict=True)
    assert np.array_equal(a["preds"], b["preds"])
    assert np.array_equal(a["probs"], b["probs"])


def test_forward_batch_keys():
    params, proj = random_setup(TOY, 16)
    cache = net.forward_batch(params, proj, [0, 1], TOY)
    assert "logits" not in cache and "probs" not in cache
    params2, proj2 = random_setup(AUX_TOY, 16)
    cache2 = net.forward_batch(params2, proj2, [0, 1], AUX_TOY)
    assert cache2["logits"].shape == (2, 3) and cache2["probs"].shape == (2, 3)


# -------------------------------------------------------------- predict_all

def test_predict_all_matches_single_forwards():
    params, proj = random_setup(TOY, 17)
    preds = net.predict_all(params, proj, TOY)
    for c in range(10):
        assert preds[c] == net.forward_vanilla(params, proj, c, TOY)[0]


def test_predict_all_chunk_invariant():
    params, proj = random_setup(SMALL, 18)
    a = net.predict_all(params, proj, SMALL, chunk=7)
    b = net.predict_all(params, proj, SMALL, chunk=4096)
    assert np.array_equal(a, b)


def test_predict_all_aux_uses_zero_image():
    params, proj = random_setup(AUX_TOY, 19)
    preds = net.predict_all(params, proj, AUX_TOY)
    direct = net.forward_batch(params, proj, np.arange(33), AUX_TOY, strict=True)["preds"]
    assert np.array_equal(preds, direct)


# ------------------------------------------------------ analytic invariants

def test_scalar_encoding_lipschitz_bound():
    # adjacent coordinates move the input by (1/(n-1))*column; the prediction
    # can move at most by the product of layer operator norms and the SeLU
    # slope bound per layer
    spec = net.NetworkSpec.vanilla(embed_dim=6, hidden_dim=6, encoding=net.SCALAR)
    rng = np.random.default_rng(23)
    params = rng.standard_normal(78) * 0.8
    proj = net.build_projections(spec, 23)
    w = net.split_params(params, spec)
    n = net.param_count(spec)
    step = np.linalg.norm(proj.coord) / (n - 1)
    bound = (np.linalg.norm(w["w_out"]) * np.linalg.norm(w["w2"], 2)
             * np.linalg.norm(w["w1"], 2) * SELU_SAT ** 3 * step)
    preds = net.predict_all(params, proj, spec)
    assert np.max(np.abs(np.diff(preds))) <= bound * (1 + 1e-12)
