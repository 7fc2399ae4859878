"""Reverse-sweep reference for the blocked GRU, used only to certify e-prop."""

from typing import Dict, Sequence

import numpy as np

from .api import PARAM_NAMES, GruStep


def bptt_blocked_oracle(
    caches: Sequence[GruStep], signals: Sequence[np.ndarray], carry_blocked: bool = False
) -> Dict[str, np.ndarray]:
    """Gradient of Σ_t ⟨L_t, h_t⟩ by a backward pass over the blocked graph.

    The only path from h_{t-1} to h_t that survives blocking is the carry
    z_t ⊙ h_{t-1}; ``carry_blocked`` cuts that one as well.
    """
    grads = {name: None for name in PARAM_NAMES}
    carried = np.zeros_like(caches[-1].h)
    for step, signal in zip(reversed(caches), reversed(signals)):
        dh = signal + carried
        g_pre_n = dh * (1.0 - step.z) * (1.0 - step.n * step.n)
        g_pre_z = dh * (step.h_prev - step.n) * step.z * (1.0 - step.z)
        g_pre_r = g_pre_n * step.hn_lin * step.r * (1.0 - step.r)
        g_hn = g_pre_n * step.r

        contributions = {
            "w_in": np.outer(g_pre_n, step.x),
            "b_in": g_pre_n,
            "w_hn": np.outer(g_hn, step.h_prev),
            "b_hn": g_hn,
            "w_iz": np.outer(g_pre_z, step.x),
            "b_iz": g_pre_z,
            "w_hz": np.outer(g_pre_z, step.h_prev),
            "b_hz": g_pre_z,
            "w_ir": np.outer(g_pre_r, step.x),
            "b_ir": g_pre_r,
            "w_hr": np.outer(g_pre_r, step.h_prev),
            "b_hr": g_pre_r,
        }
        for name, value in contributions.items():
            grads[name] = value if grads[name] is None else grads[name] + value

        carried = np.zeros_like(dh) if carry_blocked else dh * step.z
    return grads
