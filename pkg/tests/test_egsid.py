"""Decoder tests: memory fusion, attention degeneracy, oracle, gradients."""

import numpy as np
import pytest

from easl import autodiff as ad
from easl import egsid
from easl.autodiff import Tensor
from easl.egsid import EgsidConfig, EgsidParams
from easl.errors import ContractError, DimensionError

from oracles import egsid_decode_scalar, finite_diff_grad, rel_err

CFG = EgsidConfig(model_dim=8, num_heads=2, pose_dim=3, max_frames=6)


def make_params(memory_dim: int = 5, seed: int = 0, cfg: EgsidConfig = CFG) -> EgsidParams:
    return EgsidParams(cfg, memory_dim, np.random.default_rng(seed))


@pytest.fixture(autouse=True)
def fresh_tape():
    ad.clear_tape()
    yield
    ad.clear_tape()


class TestFuseMemory:
    def test_concatenates_features(self):
        H = Tensor([[1.0, 2.0], [3.0, 4.0]])
        E = Tensor([[5.0], [6.0]])
        assert egsid.fuse_memory(H, E).data.tolist() == [[1.0, 2.0, 5.0], [3.0, 4.0, 6.0]]

    def test_zero_emotion_block_still_decodes(self):
        H = Tensor(np.random.default_rng(0).normal(size=(3, 3)))
        E = Tensor(np.zeros((3, 2)))
        out = egsid.decode(egsid.fuse_memory(H, E), 2, make_params())
        assert out.poses.shape == (2, 3)
        assert np.isfinite(out.poses.data).all()

    def test_output_shape(self):
        H = Tensor(np.ones((4, 3)))
        E = Tensor(np.ones((4, 2)))
        assert egsid.fuse_memory(H, E).shape == (4, 5)

    def test_row_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            egsid.fuse_memory(Tensor(np.ones((3, 2))), Tensor(np.ones((2, 2))))


class TestDecode:
    def test_constant_memory_gives_identical_frames(self):
        params = make_params(seed=1)
        memory_row = np.random.default_rng(2).normal(size=5)
        memory = Tensor(np.tile(memory_row, (4, 1)))
        out = egsid.decode(memory, 3, params)
        for rows in (out.poses.data, out.emotions.data):
            assert np.abs(rows - rows[0]).max() < 1e-12

    def test_emotion_head_saturation(self):
        params = make_params(seed=3)
        params.b_emo.data[...] = 100.0
        memory = Tensor(np.random.default_rng(4).normal(size=(3, 5)))
        out = egsid.decode(memory, 2, params)
        assert np.abs(out.emotions.data - 1.0).max() < 1e-12

    def test_emotions_within_unit_interval(self):
        params = make_params(seed=5)
        memory = Tensor(np.random.default_rng(6).normal(size=(3, 5)))
        out = egsid.decode(memory, 4, params)
        assert (out.emotions.data > 0.0).all() and (out.emotions.data < 1.0).all()

    def test_matches_per_head_scalar_oracle(self):
        params = make_params(seed=0)
        memory = np.random.default_rng(7).normal(size=(3, 5))
        out = egsid.decode(Tensor(memory), 2, params)
        arrays = {name: t.data.tolist() for name, t in params.named().items()}
        arrays["p_pos"] = params.p_pos.data.tolist()
        poses, emotions = egsid_decode_scalar(memory.tolist(), 2, arrays, CFG.num_heads)
        assert np.abs(out.poses.data - np.array(poses)).max() < 1e-12
        assert np.abs(out.emotions.data - np.array(emotions)).max() < 1e-12

    def test_attention_rows_sum_to_one(self):
        params = make_params(seed=8)
        memory = Tensor(np.random.default_rng(9).normal(size=(5, 5)))
        out = egsid.decode(memory, 4, params)
        assert out.attention is not None and len(out.attention) == CFG.num_heads
        for weights in out.attention:
            assert weights.shape == (4, 5)
            assert np.abs(weights.sum(axis=1) - 1.0).max() < 1e-12

    def test_frame_count_bounds(self):
        params = make_params()
        memory = Tensor(np.ones((2, 5)))
        for bad in (0, CFG.max_frames + 1):
            with pytest.raises(ContractError):
                egsid.decode(memory, bad, params)

    def test_empty_memory_rejected(self):
        with pytest.raises(ContractError):
            egsid.decode(Tensor(np.ones((0, 5))), 1, make_params())


class TestDecodeSemanticOnly:
    def test_equals_decode_with_zero_emotion_block(self):
        params = make_params(seed=10)
        H = Tensor(np.random.default_rng(11).normal(size=(3, 3)))
        a = egsid.decode_semantic_only(H, 2, params)
        b = egsid.decode(egsid.fuse_memory(H, Tensor(np.zeros((3, 2)))), 2, params)
        assert np.array_equal(a.poses.data, b.poses.data)
        assert np.array_equal(a.emotions.data, b.emotions.data)

    def test_emotions_still_in_unit_interval(self):
        params = make_params(seed=12)
        H = Tensor(np.random.default_rng(13).normal(size=(4, 3)))
        out = egsid.decode_semantic_only(H, 3, params)
        assert (out.emotions.data >= 0.0).all() and (out.emotions.data <= 1.0).all()

    def test_differs_from_full_decode_when_emotion_nonzero(self):
        params = make_params(seed=0)
        rng = np.random.default_rng(14)
        H = Tensor(rng.normal(size=(3, 3)))
        E = Tensor(rng.uniform(0.2, 1.0, size=(3, 2)))
        full = egsid.decode(egsid.fuse_memory(H, E), 2, params)
        ablated = egsid.decode_semantic_only(H, 2, params)
        assert np.abs(full.poses.data - ablated.poses.data).max() > 1e-6


def test_permutation_invariance_for_identical_rows():
    params = make_params(seed=15)
    row = np.random.default_rng(16).normal(size=5)
    base = egsid.decode(Tensor(np.tile(row, (4, 1))), 3, params)
    permuted = egsid.decode(Tensor(np.tile(row, (4, 1))[::-1].copy()), 3, params)
    assert np.array_equal(base.poses.data, permuted.poses.data)


def test_decode_gradients_match_finite_differences():
    cfg = EgsidConfig(model_dim=8, num_heads=2, pose_dim=3, max_frames=4)
    params = EgsidParams(cfg, 5, np.random.default_rng(0))
    memory = Tensor(np.random.default_rng(1).normal(size=(3, 5)), requires_grad=True)
    w_p = Tensor(np.random.default_rng(2).normal(size=(2, 3)))
    w_e = Tensor(np.random.default_rng(3).normal(size=(2, 7)))

    def loss():
        out = egsid.decode(memory, 2, params)
        return ad.mean_all(ad.mul(out.poses, w_p)) + ad.mean_all(ad.mul(out.emotions, w_e))

    def forward():
        with ad.no_grad():
            return loss().item()

    targets = dict(params.named())
    targets["memory"] = memory
    for name, tensor in targets.items():
        num = finite_diff_grad(forward, tensor.data)
        ad.clear_tape()
        tensor.zero_grad()
        ad.backward(loss())
        assert rel_err(tensor.grad, num) < 1e-4, name
