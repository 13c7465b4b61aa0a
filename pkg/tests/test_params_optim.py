"""Parameter tree, checkpoint round-trip, and Adam update tests."""

import numpy as np
import pytest

from setcon.autodiff import Tensor
from setcon.optim import adam_init, adam_step
from setcon.params import (
    FormatError,
    ParameterTree,
    StructuralError,
    load_checkpoint,
    merge_trees,
    save_checkpoint,
    split_tree,
)


def small_tree(dtype=np.float64):
    rng = np.random.default_rng(0)
    tree = ParameterTree()
    tree.add("encoder.mlp1.weight", Tensor(rng.standard_normal((3, 4)).astype(dtype)), "weight")
    tree.add("encoder.mlp1.bias", Tensor(np.zeros(4, dtype=dtype)), "bias")
    tree.add("slots.init", Tensor(rng.standard_normal((2, 4)).astype(dtype)), "slot_init")
    tree.add("norm.gain", Tensor(np.ones(4, dtype=dtype)), "gain")
    return tree


def test_names_are_lexicographic_regardless_of_insertion():
    tree = ParameterTree()
    tree.add("b.x", Tensor([1.0]))
    tree.add("a.y", Tensor([2.0]))
    assert tree.names() == ["a.y", "b.x"]


def test_duplicate_name_rejected():
    tree = ParameterTree()
    tree.add("w", Tensor([1.0]))
    with pytest.raises(StructuralError):
        tree.add("w", Tensor([2.0]))


@pytest.mark.parametrize("dtype", [np.float64, np.float32])
def test_checkpoint_roundtrip_bit_exact(tmp_path, dtype):
    tree = small_tree(dtype)
    meta = {"step": 17, "note": "unit"}
    save_checkpoint(str(tmp_path / "ckpt"), tree, metadata=meta)
    loaded, meta2 = load_checkpoint(str(tmp_path / "ckpt"))
    assert meta2 == meta
    assert loaded.names() == tree.names()
    for name, t in tree.items():
        got = loaded[name].data
        assert got.dtype == t.data.dtype
        assert got.tobytes() == t.data.tobytes()
        assert loaded.role(name) == tree.role(name)


def test_checkpoint_truncated_blob_fails_closed(tmp_path):
    path = tmp_path / "ckpt"
    save_checkpoint(str(path), small_tree())
    blob = path / "params.bin"
    blob.write_bytes(blob.read_bytes()[:-8])
    with pytest.raises(FormatError, match="byte"):
        load_checkpoint(str(path))


def test_merge_and_split_roundtrip():
    tree = small_tree()
    merged = merge_trees({"model": tree})
    back = split_tree(merged, "model")
    assert back.names() == tree.names()
    for name, t in tree.items():
        np.testing.assert_array_equal(back[name].data, t.data)


# --- Adam ----------------------------------------------------------------

def scalar_adam_oracle(theta, grads, lr, b1=0.9, b2=0.999, eps=1e-8, wd=0.0):
    """Independent scalar transcription of the bias-corrected recurrence."""
    m = v = 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        theta = (theta - lr * mhat / (vhat**0.5 + eps)) * (1 - lr * wd)
    return theta


def one_param_tree(value):
    tree = ParameterTree()
    tree.add("w", Tensor(np.array([value])))
    return tree


def test_adam_first_step_is_signed_lr():
    tree = one_param_tree(1.0)
    state = adam_init(tree, lr=1e-3, eps=1e-8)
    new, state = adam_step(tree, {"w": np.array([1.0])}, state)
    assert state.step == 1
    np.testing.assert_allclose(new["w"].data, [1.0 - 1e-3], rtol=1e-6)


def test_adam_zero_gradient_keeps_parameters_and_moments():
    tree = one_param_tree(2.5)
    state = adam_init(tree, lr=1e-3, weight_decay=0.0)
    new, state2 = adam_step(tree, {"w": np.zeros(1)}, state)
    np.testing.assert_array_equal(new["w"].data, tree["w"].data)
    np.testing.assert_array_equal(state2.m["w"], np.zeros(1))
    np.testing.assert_array_equal(state2.v["w"], np.zeros(1))
    assert state2.step == state.step + 1


def test_adam_two_steps_match_scalar_oracle():
    lr, wd = 0.01, 0.1
    tree = one_param_tree(0.7)
    state = adam_init(tree, lr=lr, weight_decay=wd)
    for _ in range(2):
        tree, state = adam_step(tree, {"w": np.array([0.3])}, state)
    expected = scalar_adam_oracle(0.7, [0.3, 0.3], lr, wd=wd)
    np.testing.assert_allclose(tree["w"].data, [expected], rtol=1e-12)


def test_adam_lr_zero_is_identity():
    rng = np.random.default_rng(1)
    tree = small_tree()
    state = adam_init(tree, lr=0.0, weight_decay=1e-2)
    grads = {name: rng.standard_normal(t.data.shape) for name, t in tree.items()}
    new, _ = adam_step(tree, grads, state)
    for name, t in tree.items():
        np.testing.assert_array_equal(new[name].data, t.data)


def test_adam_tree_mismatch_is_structural_error():
    tree = one_param_tree(1.0)
    state = adam_init(tree, lr=1e-3)
    with pytest.raises(StructuralError):
        adam_step(tree, {"other": np.zeros(1)}, state)
    with pytest.raises(StructuralError):
        adam_step(tree, {"w": np.zeros(3)}, state)
