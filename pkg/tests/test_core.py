import numpy as np
import pytest

from shiftalign.core import AlignConfig, ConfigError, Shift, Stack, make_auto_config


@pytest.mark.parametrize(
    "dims, w, levels",
    [((512, 512), 170, 1), ((256, 256), 85, 0), ((3, 3), 1, 0), ((257, 100), 33, 1), ((300, 416), 100, 1)],
)
def test_auto_config(dims, w, levels):
    cfg = make_auto_config(dims)
    assert (cfg.max_shift, cfg.downsample_levels, cfg.template_index) == (w, levels, 0)
    cfg.validate_for(dims)


@pytest.mark.parametrize("dims", [(2, 10), (10, 2), (0, 0)])
def test_auto_config_too_small(dims):
    with pytest.raises(ConfigError):
        make_auto_config(dims)


def test_auto_config_bound_range():
    for m in range(3, 80):
        for n in (3, 7, 64, 300):
            cfg = make_auto_config((m, n))
            assert 1 <= cfg.max_shift < min(m, n)
            assert make_auto_config((m, n)) == cfg


@pytest.mark.parametrize("levels", [3, 4, -1])
def test_level_cap(levels):
    with pytest.raises(ConfigError, match="0..2"):
        AlignConfig(max_shift=5, downsample_levels=levels)


def test_config_rejects_large_w():
    with pytest.raises(ConfigError):
        AlignConfig(max_shift=10).validate_for((10, 40))
    with pytest.raises(ConfigError):
        AlignConfig(max_shift=0)


def test_config_rejects_small_coarse_level():
    # 7 // 2 = 3 rows at level 1, shift bound 6 // 2 = 3
    with pytest.raises(ConfigError, match="level 1"):
        AlignConfig(max_shift=6, downsample_levels=1).validate_for((7, 7))


def test_config_template_index_range():
    with pytest.raises(ConfigError):
        AlignConfig(max_shift=2, template_index=5).validate_for((8, 8), frame_count=5)


def test_stack_invariants():
    st = Stack(np.zeros((2, 3, 4), dtype=np.uint8), 8)
    assert st.frame_count == 2 and st.shape == (3, 4)
    assert st.frames.dtype == np.float64
    with pytest.raises(ValueError):
        st.frames[0, 0, 0] = 1
    with pytest.raises(ValueError):
        Stack(np.full((1, 2, 2), 256.0), 8)
    with pytest.raises(ValueError):
        Stack(np.full((1, 2, 2), -1.0), 16)
    with pytest.raises(ValueError):
        Stack(np.array([[[np.nan]]]))
    with pytest.raises(ValueError):
        Stack(np.zeros((1, 2, 2)), 12)


def test_shift_score_nonnegative():
    with pytest.raises(ValueError):
        Shift(0, 0, -1.0)
    assert Shift(1, -2).inverse().offset == (-1, 2)
    assert Shift(1, -2).chebyshev(Shift(3, -1)) == 2
