"""Compiled inner loops shared by the per-observation API and the block replay.

Every public entry point (``score``, ``update``, block replay) routes through
these functions so that the two paths produce bit-identical floats.
"""
from __future__ import annotations

import numpy as np
from numba import njit

# counters layout for the int64 state vector
WINDOW_CLICKS = 0
WINDOW_NONCLICKS = 1
TOTAL_CLICKS = 2
TOTAL_IMPRESSIONS = 3

# float state vector layout
MU = 0
EXP_MEAN = 1
WINDOW_EXP_SUM = 2

RULE_CONSTANT_RATIO = 0
RULE_LIKELIHOOD = 1

# exp() overflow guard; calibrated scores sit near log(CTR), far below this
SCORE_CAP = 50.0


@njit(cache=True)
def compose_into(values, offsets, slots, profile, out):
    out[:] = 1.0
    K, d = slots.shape
    for j in range(K):
        row = offsets[j] + profile[j]
        for t in range(d):
            out[slots[j, t]] *= values[row, t]


@njit(cache=True)
def scores_into(variants, u, out):
    L, D = variants.shape
    for a in range(L):
        acc = 0.0
        for i in range(D):
            acc += variants[a, i] * u[i]
        out[a] = acc


@njit(cache=True)
def rank_of(scores, target):
    """1-based rank of ``target``; ties go to the lower id."""
    s = scores[target]
    r = 1
    for a in range(scores.shape[0]):
        if scores[a] > s or (scores[a] == s and a < target):
            r += 1
    return r


@njit(cache=True)
def feature_gradients(values, offsets, slots, partner_feat, partner_pos, profile, a, grad):
    K, d = slots.shape
    for j in range(K):
        for t in range(d):
            i = slots[j, t]
            k = partner_feat[j, t]
            if k < 0:
                grad[j, t] = a[i]
            else:
                grad[j, t] = a[i] * values[offsets[k] + profile[k], partner_pos[j, t]]


@njit(cache=True)
def apply_step(values, offsets, slots, partner_feat, partner_pos, variants,
               profile, variant, step, u, grad):
    """Move the variant vector and the profile's value vectors by ``step``
    times the score gradient. ``u`` must hold the composed user vector."""
    a = variants[variant]
    # gradients are taken from pre-update values
    feature_gradients(values, offsets, slots, partner_feat, partner_pos, profile, a, grad)
    for i in range(a.shape[0]):
        a[i] += step * u[i]
    K, d = slots.shape
    for j in range(K):
        row = offsets[j] + profile[j]
        for t in range(d):
            values[row, t] += step * grad[j, t]


@njit(cache=True)
def _scale_family(block, bound):
    m = 0.0
    for x in block.flat:
        ax = abs(x)
        if ax > m:
            m = ax
    if m > bound:
        c = bound / m
        for idx in np.ndindex(block.shape):
            block[idx] *= c


@njit(cache=True)
def linf_rescale(values, offsets, variants, bound):
    _scale_family(variants, bound)
    for k in range(offsets.shape[0] - 1):
        _scale_family(values[offsets[k]:offsets[k + 1]], bound)


@njit(cache=True)
def refresh_mu(fstate, counters, gamma):
    nc = counters[WINDOW_NONCLICKS]
    if nc > 0:
        target = -counters[WINDOW_CLICKS] / nc
        fstate[MU] = gamma * target + (1.0 - gamma) * fstate[MU]
    counters[WINDOW_CLICKS] = 0
    counters[WINDOW_NONCLICKS] = 0


@njit(cache=True)
def refresh_exp_mean(fstate, window, gamma):
    m = fstate[WINDOW_EXP_SUM] / window
    if fstate[EXP_MEAN] > 0.0:
        fstate[EXP_MEAN] = gamma * m + (1.0 - gamma) * fstate[EXP_MEAN]
    else:
        fstate[EXP_MEAN] = m
    fstate[WINDOW_EXP_SUM] = 0.0


@njit(cache=True)
def click_probability(fstate, s):
    """Online estimate of the softmax click probability of a pair with score ``s``."""
    mu = fstate[MU]
    rate = -mu / (1.0 - mu)
    if fstate[EXP_MEAN] <= 0.0:
        return rate
    pc = rate * np.exp(min(s, SCORE_CAP)) / fstate[EXP_MEAN]
    return min(pc, 1.0)


@njit(cache=True)
def offset_run(values, offsets, slots, partner_feat, partner_pos, variants,
               fstate, counters, alpha, gamma, cadence, step_rule, rescale, bound,
               profiles, obs_variants, rewards, score_mask, ranks_out):
    """Replay a block of observations through the trainer.

    ``ranks_out[n]`` receives the rank of the logged variant for rows with
    ``score_mask[n]`` set (ranked before the row is trained on), else 0.
    """
    K, d = slots.shape
    L, D = variants.shape
    u = np.empty(D)
    grad = np.empty((K, d))
    scores = np.empty(L)
    for n in range(profiles.shape[0]):
        p = profiles[n]
        v = obs_variants[n]
        compose_into(values, offsets, slots, p, u)
        if score_mask[n]:
            scores_into(variants, u, scores)
            ranks_out[n] = rank_of(scores, v)
        else:
            ranks_out[n] = 0
        s = 0.0
        for i in range(D):
            s += variants[v, i] * u[i]
        if not np.isfinite(s):
            raise FloatingPointError("non-finite score; model diverged")
        click = rewards[n] != 0
        if step_rule == RULE_LIKELIHOOD:
            fstate[WINDOW_EXP_SUM] += np.exp(min(s, SCORE_CAP))
            pc = click_probability(fstate, s)
            step = alpha * (1.0 - pc) if click else -alpha * pc
        else:
            step = alpha if click else alpha * fstate[MU]
        apply_step(values, offsets, slots, partner_feat, partner_pos, variants, p, v, step, u, grad)
        if click:
            counters[WINDOW_CLICKS] += 1
            counters[TOTAL_CLICKS] += 1
        else:
            counters[WINDOW_NONCLICKS] += 1
        counters[TOTAL_IMPRESSIONS] += 1
        if counters[TOTAL_IMPRESSIONS] % cadence == 0:
            if step_rule == RULE_LIKELIHOOD:
                refresh_exp_mean(fstate, cadence, gamma)
            refresh_mu(fstate, counters, gamma)
            if rescale:
                linf_rescale(values, offsets, variants, bound)


@njit(cache=True)
def popularity_run(clicks, imps, since_decay, decay_factor, decay_cadence, c0, i0,
                   obs_variants, rewards, score_mask, ranks_out):
    L = clicks.shape[0]
    ctr = np.empty(L)
    for n in range(obs_variants.shape[0]):
        v = obs_variants[n]
        if score_mask[n]:
            for a in range(L):
                ctr[a] = (clicks[a] + c0) / (imps[a] + i0)
            ranks_out[n] = rank_of(ctr, v)
        else:
            ranks_out[n] = 0
        imps[v] += 1.0
        if rewards[n] != 0:
            clicks[v] += 1.0
        since_decay[0] += 1
        if since_decay[0] == decay_cadence:
            since_decay[0] = 0
            for a in range(L):
                clicks[a] *= decay_factor
                imps[a] *= decay_factor
