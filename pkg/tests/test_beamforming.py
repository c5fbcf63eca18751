import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from rsma_isac.beamforming import (ActionLayout, PhaseCodebook, ZFInfeasible, assemble,
                                   assemble_full, decode_common_rates, decode_phases,
                                   decode_powers, matched_receive_beamformer,
                                   mrt_common_direction, mrt_radar_direction,
                                   zf_private_directions)
from rsma_isac.channel import realize
from rsma_isac.env import IsacEnv, Scenario
from rsma_isac.metrics import PowerModel, cascade_echo, echo_snr, echo_vector, evaluate, QosThresholds

P_MAX = 0.1


def cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def test_zf_single_user_is_mrt():
    F = cn(np.random.default_rng(0), 1, 4)
    J = zf_private_directions(F)
    np.testing.assert_allclose(J[:, 0], F[0].conj() / np.linalg.norm(F[0]), rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_zf_nulls_other_users(K, seed):
    rng = np.random.default_rng(seed)
    M = 4
    F = cn(rng, K, M)
    if np.linalg.cond(F) > 1e6:
        return
    J = zf_private_directions(F)
    np.testing.assert_allclose(np.linalg.norm(J, axis=0), 1.0, rtol=1e-12)
    cross = np.abs(F @ J)
    for i in range(K):
        for k in range(K):
            if i != k:
                assert cross[i, k] <= 1e-10 * np.linalg.norm(F[i])
    # same directions as the normalised pseudo-inverse columns
    pinv = np.linalg.pinv(F)
    np.testing.assert_allclose(F @ pinv, np.eye(K), atol=1e-10)
    np.testing.assert_allclose(np.abs(J.conj().T @ (pinv / np.linalg.norm(pinv, axis=0))).diagonal(),
                               1.0, rtol=1e-10)


def test_zf_rejects_rank_deficient_and_wide():
    rng = np.random.default_rng(1)
    row = cn(rng, 1, 4)
    with pytest.raises(ZFInfeasible):
        zf_private_directions(np.vstack([row, 2 * row]))
    with pytest.raises(ZFInfeasible):
        zf_private_directions(cn(rng, 5, 4))


def test_mrt_common_direction():
    rng = np.random.default_rng(2)
    F1 = cn(rng, 1, 4)
    one = mrt_common_direction(F1)
    np.testing.assert_allclose(one, F1[0].conj() / np.linalg.norm(F1[0]), rtol=1e-12)
    np.testing.assert_allclose(mrt_common_direction(np.vstack([F1, F1])), one, rtol=1e-12)
    assert np.linalg.norm(mrt_common_direction(cn(rng, 3, 4))) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        mrt_common_direction(np.vstack([F1, -F1]))


def test_radar_direction_maximises_echo():
    rng = np.random.default_rng(3)
    G, hr, phi = cn(rng, 9, 4), cn(rng, 9), rng.uniform(0, 6, 9)
    v = mrt_radar_direction(G, phi, hr)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    Fh = cascade_echo(G, phi, hr)
    best = echo_snr(Fh @ v, Fh, v, 1.0)
    rand = cn(rng, 1000, 4)
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    others = echo_snr(np.einsum("mn,kn->km", Fh, rand), Fh, rand, 1.0)
    assert np.all(others <= best * (1 + 1e-12))
    # a global phase on h_r rotates the direction without changing the echo
    w = mrt_radar_direction(G, phi, hr * np.exp(0.9j))
    assert abs(np.vdot(v, w)) == pytest.approx(1.0)


def test_matched_filter():
    rng = np.random.default_rng(4)
    G, hr, phi = cn(rng, 9, 4), cn(rng, 9), rng.uniform(0, 6, 9)
    Fh, a = cascade_echo(G, phi, hr), echo_vector(G, phi, hr)
    v = cn(rng, 4)
    u = matched_receive_beamformer(Fh, v)
    assert np.linalg.norm(u) == pytest.approx(1.0)
    assert echo_snr(u, Fh, v, 2.0) == pytest.approx(np.linalg.norm(Fh @ v)**2 / 2.0, rel=1e-12)
    assert abs(np.vdot(u, a)) == pytest.approx(np.linalg.norm(a), rel=1e-12)
    rand = cn(rng, 1000, 4)
    assert np.all(echo_snr(rand, Fh, v, 2.0) <= echo_snr(u, Fh, v, 2.0) * (1 + 1e-12))
    with pytest.raises(ValueError):
        matched_receive_beamformer(np.zeros((4, 4)), v)


def test_decode_powers_examples():
    layout = ActionLayout(2, 9)
    xi = np.zeros(layout.size)
    c, p, r = decode_powers(xi, P_MAX, layout)
    assert c == pytest.approx(0.5 * np.sqrt(P_MAX))
    np.testing.assert_allclose(p, 0.5 * np.sqrt(P_MAX))
    assert r == pytest.approx(0.5 * np.sqrt(P_MAX))
    lo = decode_powers(np.full(layout.size, -50.0), P_MAX, layout)
    hi = decode_powers(np.full(layout.size, 50.0), P_MAX, layout)
    assert lo[0] == 0 and np.all(lo[1] == 0)
    assert hi[0] == pytest.approx(np.sqrt(P_MAX)) and hi[2] == pytest.approx(np.sqrt(P_MAX))


def test_decode_common_rates_examples():
    rc = np.array([3.0, 2.0])
    np.testing.assert_allclose(decode_common_rates(np.zeros(2), rc), [1.0, 1.0])
    np.testing.assert_allclose(decode_common_rates(np.full(2, -50.0), rc), 0.0)
    top = decode_common_rates(np.full(2, 50.0), rc)
    assert top.sum() == pytest.approx(4.0)
    from rsma_isac.metrics import constraint_flags
    flags = constraint_flags(top, rc, np.full(2, 5.0), 1.0, 5.0, PowerModel(), QosThresholds())
    assert not flags[0]


def test_phase_codebook_b2():
    cb = PhaseCodebook(2)
    assert cb.step == pytest.approx(np.pi / 2)
    np.testing.assert_allclose(cb.levels, [0, np.pi / 2, np.pi, 3 * np.pi / 2])
    with pytest.raises(ValueError):
        PhaseCodebook(0)


def test_decode_phases_examples():
    cb = PhaseCodebook(2)
    # the continuous map gives 0.75*pi at xi = 0, a midpoint: ties go down
    assert decode_phases(np.array([0.0]), cb)[0] == pytest.approx(np.pi / 2)
    assert decode_phases(np.array([50.0]), cb)[0] == pytest.approx(3 * np.pi / 2)
    assert decode_phases(np.array([-50.0]), cb)[0] == 0.0
    assert decode_phases(np.array([0.01]), cb)[0] == pytest.approx(np.pi)


finite_logits = hnp.arrays(np.float64, 16, elements=st.floats(-1e3, 1e3))


@settings(max_examples=200, deadline=None)
@given(finite_logits, st.integers(1, 4))
def test_decoders_stay_in_range(xi, B):
    layout = ActionLayout(2, 9)
    cb = PhaseCodebook(B)
    c, p, r = decode_powers(xi, P_MAX, layout)
    for amp in (c, p, r):
        assert np.all((amp >= 0) & (amp <= np.sqrt(P_MAX) * (1 + 1e-15)))
    phases = decode_phases(xi[layout.phases], cb)
    idx = phases / cb.step
    np.testing.assert_allclose(idx, np.round(idx), atol=1e-9)
    assert np.all((phases >= 0) & (phases < 2 * np.pi))
    rates = decode_common_rates(xi[layout.common_rates], np.array([2.0, 3.0]))
    assert np.all(rates >= 0)


def test_action_layout_sizes():
    assert ActionLayout(2, 9).size == 2 * 2 + 9 + 3
    assert ActionLayout(2, 9, sdma=True).size == 2 + 9 + 3
    lay = ActionLayout(3, 4)
    covered = (list(range(lay.size))[lay.common_rates] + list(range(lay.size))[lay.private_powers]
               + [lay.common_power, lay.radar_power] + list(range(lay.size))[lay.phases] + [lay.receive])
    assert sorted(covered) == list(range(lay.size))


@pytest.fixture(scope="module")
def env():
    e = IsacEnv(Scenario())
    e.reset(2024)
    return e


def test_assemble_golden(env):
    sc = env.scenario
    d = assemble(np.zeros(env.action_dim), env.channel, sc.power, sc.codebook, sc.fading.noise_user,
                 env.layout)
    np.testing.assert_allclose(d.v_c, [-0.04851327517895148 + 0.0245521026058959j,
                                       -0.10015525757263938 - 0.02046252040551597j,
                                       -0.05263395907208682 - 0.07676569636970969j,
                                       0.042445094195951 - 0.03360021160976925j], rtol=1e-12)
    np.testing.assert_allclose(d.v_p[:, 0], [0.00962192933547899 - 0.07981694396651558j,
                                             -0.07781904512343805 - 0.03933334447963129j,
                                             -0.07062533739256008 + 0.00040534472344661j,
                                             -0.06614176862668224 + 0.03963485860462721j], rtol=1e-12)
    np.testing.assert_allclose(d.c, [1.7644155811681372] * 2, rtol=1e-12)
    np.testing.assert_allclose(d.phases, np.pi / 2)


@settings(max_examples=50, deadline=None)
@given(finite_logits)
def test_assemble_power_bound_and_grid(xi):
    e = IsacEnv(Scenario())
    e.reset(5)
    sc = e.scenario
    pm = PowerModel(chi=1)
    d1 = assemble(xi, e.channel, pm, sc.codebook, sc.fading.noise_user, e.layout)
    d2 = assemble(xi, e.channel, pm, sc.codebook, sc.fading.noise_user, e.layout)
    for f in ("v_c", "v_p", "v_r", "u", "c", "phases"):
        assert np.array_equal(getattr(d1, f), getattr(d2, f))
    from rsma_isac.metrics import transmit_power
    assert transmit_power(d1, pm) <= pm.amplifier_efficiency * 4 * pm.max_power + pm.static_power + 1e-12
    idx = d1.phases / sc.codebook.step
    np.testing.assert_allclose(idx, np.round(idx), atol=1e-9)
    assert np.all(d1.c >= 0)


def test_assemble_batch_matches_single(env):
    sc = env.scenario
    xs = np.random.default_rng(0).uniform(-3, 3, (6, env.action_dim))
    batch = assemble_full(xs, env.channel, sc.power, sc.codebook, sc.fading.noise_user, env.layout)
    for i, x in enumerate(xs):
        one = assemble(x, env.channel, sc.power, sc.codebook, sc.fading.noise_user, env.layout)
        np.testing.assert_allclose(batch.decision.v_p[i], one.v_p, rtol=1e-12)
        np.testing.assert_allclose(batch.decision.c[i], one.c, rtol=1e-12)


def test_assemble_rejects_wrong_length(env):
    sc = env.scenario
    with pytest.raises(ValueError):
        assemble(np.zeros(5), env.channel, sc.power, sc.codebook, sc.fading.noise_user, env.layout)


def test_sdma_assembly_has_no_common_stream(env):
    sc = env.scenario
    layout = ActionLayout(2, 9, sdma=True)
    xi = np.random.default_rng(1).uniform(-3, 3, layout.size)
    d = assemble(xi, env.channel, sc.power, sc.codebook, sc.fading.noise_user, layout)
    assert np.all(d.v_c == 0) and np.all(d.c == 0)


def test_zf_fallback_on_degenerate_channel(caplog):
    sc = Scenario()
    ch = realize(sc.geometry, sc.fading, sc.mobility, 0.0, 3)
    # identical users make the cascaded stack rank one
    from dataclasses import replace
    twin = replace(ch, h_users=np.repeat(ch.h_users[:, :1], 2, axis=1))
    layout = ActionLayout(2, 9)
    with caplog.at_level("INFO"):
        asm = assemble_full(np.zeros(layout.size), twin, sc.power, sc.codebook,
                            sc.fading.noise_user, layout)
    assert bool(asm.zf_fallback)
    np.testing.assert_allclose(np.linalg.norm(asm.decision.v_p, axis=0), 0.5 * np.sqrt(P_MAX))
    m = evaluate(asm.F, asm.a_echo, asm.decision, sc.power, sc.qos, sc.fading.noise_user,
                 sc.fading.noise_radar)
    assert np.isfinite(m.ee)
