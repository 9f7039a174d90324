import math

import numpy as np
import pytest

from pspace.errors import InvalidArgument, NumericalFailure, UnsupportedConfiguration
from pspace.propagator import (
    Interaction, PropagationState, Wavepacket, _interaction_jit, _interaction_numpy,
    apply_field_free_halfstep, apply_interaction, bound_populations, build_halfstep_matrices,
    coupling_table, propagate, step_count,
)
from pspace.pulse import PulseConfig

from oracles import expm_cos_theta


@pytest.fixture
def packet(small_hydrogen):
    return Wavepacket.from_state(small_hydrogen, 3)


def _weak_pulse(cycles=1.0, intensity=1e13, envelope="vector-potential"):
    return PulseConfig.from_parameters(peak_intensity=intensity, wavelength_nm=400.0,
                                       cycles=cycles, envelope=envelope)


def test_wavepacket_shape_check(small_grid):
    with pytest.raises(InvalidArgument):
        Wavepacket(np.zeros((2, 5)), small_grid)


def test_halfstep_zero_dt_is_completeness(small_hydrogen):
    mats = build_halfstep_matrices(small_hydrogen, 0.0)
    eye = np.eye(small_hydrogen.grid.n_points)
    assert np.max(np.abs(mats.half - eye[None])) < 1e-8


def test_halfstep_on_eigenstate(small_hydrogen, packet):
    dt = 0.3
    mats = build_halfstep_matrices(small_hydrogen, dt, 3)
    out = apply_field_free_halfstep(packet, mats)
    E = small_hydrogen[0].energies[0]
    expect = np.exp(-0.5j * E * dt) * packet.coeffs
    assert np.max(np.abs(out.coeffs - expect)) < 1e-9
    assert out.t == pytest.approx(0.5 * dt)


def test_halfstep_semigroup(small_hydrogen):
    a = build_halfstep_matrices(small_hydrogen, 0.2, 3)
    b = build_halfstep_matrices(small_hydrogen, 0.4, 3, merged=False)
    for l in range(4):
        assert np.max(np.abs(a.half[l] @ a.half[l] - b.half[l])) < 1e-10
        assert np.max(np.abs(a.full[l] - b.half[l])) < 1e-12


def test_halfstep_block_diagonal(small_hydrogen, rng):
    mats = build_halfstep_matrices(small_hydrogen, 0.1, 3)
    c = np.zeros((4, small_hydrogen.grid.n_points), complex)
    c[2] = rng.standard_normal(c.shape[1])
    out = apply_field_free_halfstep(Wavepacket(c, small_hydrogen.grid), mats).coeffs
    assert np.all(out[[0, 1, 3]] == 0)
    assert np.any(out[2] != 0)
    assert np.all(apply_field_free_halfstep(Wavepacket(0 * c, small_hydrogen.grid), mats).coeffs == 0)


def test_halfstep_mismatch(small_hydrogen, packet):
    mats = build_halfstep_matrices(small_hydrogen, 0.1, 2)
    with pytest.raises(InvalidArgument):
        apply_field_free_halfstep(packet, mats)
    with pytest.raises(InvalidArgument):
        build_halfstep_matrices(small_hydrogen, 0.1, 9)


def test_coupling_table_parity_and_sum():
    G = coupling_table(6)
    for l in range(7):
        for k in range(13):
            for l2 in range(7):
                if (l + k + l2) % 2 or k < abs(l - l2) or k > l + l2:
                    assert G[l, k, l2] == 0.0
        # at zero argument only k = 0 survives: the identity
        assert G[l, 0, l] == pytest.approx(1.0)


def test_interaction_zero_field_is_identity(packet):
    out = apply_interaction(packet, 0.0, 0.05)
    assert np.array_equal(out.coeffs, packet.coeffs)


def test_interaction_rejects_m(packet):
    wp = Wavepacket(packet.coeffs, packet.grid, m=1)
    with pytest.raises(UnsupportedConfiguration):
        apply_interaction(wp, 0.1, 0.05)


@pytest.mark.parametrize("adt", [1e-4, 0.05, 0.7, -0.4])
def test_interaction_matches_dense_exponential(small_grid, adt, rng):
    # l <= 3 input, l_max = 20 keeps the truncated top well below 1e-12
    l_max = 20
    c = np.zeros((l_max + 1, small_grid.n_points), complex)
    c[:4] = rng.standard_normal((4, small_grid.n_points)) + 1j * rng.standard_normal((4, small_grid.n_points))
    sel = small_grid.p_nodes <= 3.0
    c[:, ~sel] = 0
    out = Interaction(l_max, small_grid).apply(c, adt, 1.0)
    for j in np.nonzero(sel)[0][::7]:
        ref = expm_cos_theta(l_max, adt * small_grid.p_nodes[j]) @ c[:, j]
        assert np.max(np.abs(out[:, j] - ref)) < 1e-12 * max(1.0, np.abs(c[:, j]).max())


def test_interaction_first_order(small_grid):
    # exp(-i x cos) |0> ~ |0> - i x / sqrt(3) |1> for small x
    c = np.zeros((4, small_grid.n_points), complex)
    c[0] = 1.0
    adt = 1e-6
    out = Interaction(3, small_grid).apply(c, adt, 1.0)
    x = adt * small_grid.p_nodes
    assert np.allclose(out[1], -1j * x / math.sqrt(3), rtol=1e-6, atol=0)


def test_interaction_backends_agree(small_grid, rng):
    l_max = 8
    f = rng.standard_normal((l_max + 1, small_grid.n_points)) + 0j
    G = coupling_table(l_max)
    p = np.ascontiguousarray(small_grid.p_nodes)
    for adt in (0.01, 0.3, -0.2):
        a = _interaction_jit(f, p, adt, G)
        b = _interaction_numpy(f, p, adt, G)
        assert np.max(np.abs(a - b)) < 1e-12 * np.abs(f).max()


def test_interaction_unitary_when_converged(small_grid, rng):
    l_max = 30
    c = np.zeros((l_max + 1, small_grid.n_points), complex)
    c[:3] = rng.standard_normal((3, small_grid.n_points))
    c[:, small_grid.p_nodes > 2.0] = 0
    wp = Wavepacket(c, small_grid)
    out = apply_interaction(wp, 0.5, 0.4)
    assert out.population_by_l()[-1] < 1e-12 * wp.norm2()
    assert out.norm2() == pytest.approx(wp.norm2(), rel=1e-10)


def test_step_count():
    n, dt = step_count(10.0, 0.3)
    assert n == 33 and n * dt == pytest.approx(10.0)
    with pytest.raises(InvalidArgument):
        step_count(10.0, 0.0)


def test_zero_field_phase(small_hydrogen, packet):
    pulse = PulseConfig(0.0, 0.05, 50.0)
    out = propagate(packet, small_hydrogen, pulse, 0.05, observer_stride=0)
    E = small_hydrogen[0].energies[0]
    expect = np.exp(-1j * E * pulse.duration) * packet.coeffs
    w = small_hydrogen.grid.quad_weights
    overlap = np.sum(w * np.conj(packet.coeffs[0]) * out.coeffs[0])
    assert abs(overlap) ** 2 >= 1 - 1e-8
    assert abs(np.angle(overlap * np.exp(1j * E * pulse.duration))) < 1e-6
    assert np.max(np.abs(out.coeffs - expect)) < 1e-7


def test_merged_equals_literal(small_hydrogen, packet):
    pulse = _weak_pulse()
    a = propagate(packet, small_hydrogen, pulse, 0.1, observer_stride=0)
    b = propagate(packet, small_hydrogen, pulse, 0.1, observer_stride=0, merge_halfsteps=False)
    n, _ = step_count(pulse.duration, 0.1)
    assert np.max(np.abs(a.coeffs - b.coeffs)) < 1e-12 * n


def test_resume_is_bit_identical(small_hydrogen, packet):
    pulse = _weak_pulse()
    full = propagate(packet, small_hydrogen, pulse, 0.1, observer_stride=0)
    saved = []
    part = propagate(packet, small_hydrogen, pulse, 0.1, observer_stride=0,
                     checkpoint=saved.append, checkpoint_stride=50, stop_after=120)
    assert isinstance(part, PropagationState) and part.step == 120
    assert [s.step for s in saved] == [50, 100]
    rest = propagate(packet, small_hydrogen, pulse, 0.1, observer_stride=0, resume=saved[-1])
    assert np.array_equal(rest.coeffs, full.coeffs)
    with pytest.raises(InvalidArgument):
        propagate(packet, small_hydrogen, pulse, 0.2, observer_stride=0, resume=saved[-1])


def test_observer_and_norm(small_hydrogen, packet):
    # l_max = 3 here, so the field must stay weak enough to leave l = 3 empty
    rows = []
    out = propagate(packet, small_hydrogen, _weak_pulse(intensity=1e12), 0.05,
                    observer=lambda *r: rows.append(r), observer_stride=20)
    assert rows[0][0] == 0 and rows[0][2] == pytest.approx(1.0, abs=1e-10)
    assert rows[-1][0] == step_count(_weak_pulse().duration, 0.05)[0]
    ground, bound = bound_populations(small_hydrogen, out.coeffs)
    assert 0.9 < ground <= bound <= out.norm2() + 1e-12
    assert abs(out.norm2() - 1) < 1e-8


def test_nan_is_reported(small_hydrogen, packet):
    bad = packet.copy()
    bad.coeffs[1, 3] = np.nan
    with pytest.raises(NumericalFailure) as info:
        propagate(bad, small_hydrogen, _weak_pulse(), 0.1, observer_stride=10)
    assert info.value.index == 10
    with pytest.raises(NumericalFailure):
        propagate(bad, small_hydrogen, _weak_pulse(), 0.1, observer_stride=0)


def test_time_reversal(small_hydrogen, packet):
    pulse = _weak_pulse(intensity=1e12)
    out = propagate(packet, small_hydrogen, pulse, 0.05, observer_stride=0)
    # conjugation reverses time for a real Hamiltonian in this basis
    back = propagate(Wavepacket(np.conj(out.coeffs), out.grid), small_hydrogen,
                     PulseConfig(pulse.peak_field, pulse.omega, pulse.duration,
                                 pulse.cep, pulse.envelope), 0.05, observer_stride=0)
    ov = np.sum(small_hydrogen.grid.quad_weights * np.conj(packet.coeffs) * np.conj(back.coeffs))
    # the A(t) profile of this pulse is symmetric about T/2, so the same pulse
    # played again is its own time reverse
    assert abs(ov) ** 2 >= 1 - 1e-10
