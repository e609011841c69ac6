import math

import numpy as np
import pytest

from covshift.instance import (
    MomentConstants,
    ProblemInstance,
    dump_instance,
    instance_norms,
    load_instance,
    make_custom_instance,
    make_example1_instance,
    make_pk_instance,
    parse_instance,
    save_instance,
)


def test_pk_small_instance():
    inst = make_pk_instance(2, 4)
    np.testing.assert_allclose(inst.h, [1, 2**-1.5, 3**-1.5, 4**-1.5])
    np.testing.assert_allclose(inst.g, [1 / 4, 1, 1 / 9, 1 / 16])
    np.testing.assert_allclose(inst.w_star, [1, 1, 1 / 3, 1 / 4])
    assert inst.sigma2 == 1.0


def test_pk_with_k1_is_plain_power_law():
    inst = make_pk_instance(1, 3)
    np.testing.assert_allclose(inst.g, [1, 1 / 4, 1 / 9])
    np.testing.assert_allclose(inst.h, [1, 2**-1.5, 3**-1.5])


def test_pk_traces_are_order_one():
    inst = make_pk_instance(5, 200)
    assert 1 <= inst.trace_g <= 2.5
    assert 1 <= inst.trace_h <= 2.5


@pytest.mark.parametrize("k,d", [(0, 3), (4, 3), (-1, 5)])
def test_pk_rejects_bad_k(k, d):
    with pytest.raises(ValueError):
        make_pk_instance(k, d)


def test_example1_quarter():
    inst = make_example1_instance(0.25)
    assert inst.dim == 5
    np.testing.assert_allclose(inst.h, [1, 0.5, 0.5, 0.5, 0.5])
    np.testing.assert_allclose(inst.g, [0.0625, 1, 0, 0, 0])
    np.testing.assert_allclose(inst.w_star, [1, 1, 0, 0, 0])


def test_example1_sixteenth():
    inst = make_example1_instance(1 / 16)
    assert inst.dim == 9
    assert inst.trace_h == pytest.approx(3.0)
    assert inst.g[0] == pytest.approx(1 / 256)


def test_example1_rejects_non_integer_copies():
    with pytest.raises(ValueError):
        make_example1_instance(0.3)


def test_validation():
    with pytest.raises(ValueError):
        ProblemInstance([1.0], [-1.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        ProblemInstance([1.0, 2.0], [1.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        ProblemInstance([1.0], [0.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        ProblemInstance([1.0], [1.0], [1.0], -0.1)
    with pytest.raises(ValueError):
        ProblemInstance([math.nan], [1.0], [1.0], 1.0)


def test_arrays_are_read_only():
    inst = make_pk_instance(2, 4)
    with pytest.raises(ValueError):
        inst.g[0] = 5.0


def test_norms():
    inst = make_custom_instance([1.0, 4.0], [2.0, 0.5], [0.0, 0.0], 1.0)
    assert instance_norms(inst, [1.0, 2.0]) == (17.0, 4.0)
    with pytest.raises(ValueError):
        instance_norms(inst, [1.0])


def test_snr_values():
    inst = make_custom_instance([2.0], [3.0], [1.0], 0.5)
    assert inst.snr_source() == 4.0
    assert inst.snr_target() == 6.0
    noiseless = make_custom_instance([2.0], [3.0], [1.0], 0.0)
    assert noiseless.snr_source() == math.inf


def test_gaussian_constants():
    inst = make_pk_instance(2, 4)
    cst = MomentConstants.gaussian(inst)
    assert (cst.alpha, cst.beta) == (3.0, 1.0)
    assert cst.r2 == pytest.approx(3 * max(inst.trace_g, inst.trace_h))
    assert cst.bias_upper_source == pytest.approx(24 * math.e)
    assert MomentConstants.gaussian(inst, var_upper=1e-6).var_upper == 1e-6


def test_instance_file_round_trip(tmp_path):
    inst = make_pk_instance(3, 7)
    path = tmp_path / "inst.txt"
    save_instance(inst, path)
    assert load_instance(path) == inst
    assert parse_instance(dump_instance(inst)) == inst


def test_instance_file_errors():
    with pytest.raises(ValueError):
        parse_instance("g = 1\nh = 1\nw_star = 1\n")
    with pytest.raises(ValueError):
        parse_instance("g = 1\ng = 1\nh = 1\nw_star = 1\nsigma2 = 1\n")
    with pytest.raises(ValueError):
        parse_instance("g = 1\nh = x\nw_star = 1\nsigma2 = 1\n")


def test_norm_examples():
    inst = make_custom_instance([2.0, 3.0], [1.0, 1.0], [0.0, 0.0], 1.0)
    assert instance_norms(inst, [1.0, 1.0])[0] == 5.0
    pk = make_pk_instance(2, 4)
    assert instance_norms(pk, pk.w_star)[1] == pytest.approx(1.38275, abs=1e-5)
    assert instance_norms(pk, np.zeros(4)) == (0.0, 0.0)


def test_minimal_and_invalid_custom_instances():
    assert make_custom_instance([1.0], [1.0], [1.0], 1.0).dim == 1
    with pytest.raises(ValueError):
        make_custom_instance([1.0, 0.5], [1.0], [1.0], 1.0)
    with pytest.raises(ValueError):
        make_custom_instance([0.0, 0.0], [1.0, 1.0], [1.0, 1.0], 1.0)


def test_pk_trace_caps():
    for k, d in [(1, 50), (5, 200), (20, 200), (50, 500)]:
        inst = make_pk_instance(k, d)
        assert inst.trace_h < 2.62
        assert inst.trace_g < 3.0
