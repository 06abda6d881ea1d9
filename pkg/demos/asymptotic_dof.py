"""Degrees of freedom with many molecule types.

With L = (n + 1)^N + 2 n^N types a three-user channel reaches (3n + 1)/(2n + 1)
degrees of freedom, approaching 3/2.  The verifier builds the asymptotic
beamforming vectors for a random diagonal channel and checks by SVD rank
that the interference collapses while the desired streams stay resolvable.
"""

import numpy as np

from molia import AsymptoticConfig, DiagonalChannelStack, build_beamforming, dof, verify_alignment

rng = np.random.default_rng(0)
for n in (1, 2, 3, 64):
    cfg = AsymptoticConfig(3, n)
    line = f"n = {n:2d}: L = {cfg.L:3d} types, dof = {dof(cfg)} = {float(dof(cfg)):.4f}"
    if n <= 3:
        ch = DiagonalChannelStack.random(3, cfg.L, rng)
        rep = verify_alignment(cfg, ch, build_beamforming(cfg, ch))
        line += f", interference ranks {rep.interference_rank.tolist()} (aligned: {rep.ok})"
    print(line)
