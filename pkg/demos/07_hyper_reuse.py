"""
Reusing the prior set for hyperlatents
======================================

The small side block (hyperlatents) does not earn its own tables.
Per-channel logits pick one of the already-trained main tables for
each hyper channel, and channels whose content is pure noise can be
pruned before coding.
"""

import numpy as np

from swpc import (
    IndexGrid,
    LatentBlock,
    SourceSpec,
    TrainConfig,
    backend_switch,
    backend_switch_decode,
    export_tables,
    gen_block,
    prune_hyper_channels,
    restore_pruned_channels,
    train_priors,
)

main = gen_block(SourceSpec("gm", (2, 32, 32), seed=21, sigma_range=(0.3, 10.0)))

# Hand-built z: each channel has one spread, so each should claim a
# different rung of the trained ladder.
rng = np.random.default_rng(5)
channel_sigma = np.array([0.4, 1.2, 3.5, 9.0])
z_res = np.round(rng.normal(0.0, channel_sigma[:, None, None], (4, 16, 16)))
z_feats = np.broadcast_to(channel_sigma[:, None, None], z_res.shape)
z = LatentBlock(z_res, np.zeros(z_res.shape), z_feats)

config = TrainConfig("gm", (6,), epochs=200, seed=21,
                     predictor_mode="calibration-curve")
result = train_priors([main], config, z_block=z)
table_set = export_tables(result.prior_set)
print("tables in the set:", len(table_set.tables), " (none added for z)")

# One winning main-table per hyper channel.
selected = result.hyper_logits.selected()
print("per-channel table picks:", selected.tolist())

per_element = np.broadcast_to(selected.astype(float)[:, None, None],
                              z.residuals.shape).copy()
z_indexes = IndexGrid.from_continuous(per_element, 6)
stream, report = backend_switch(z, z_indexes, None, table_set)
decoded, _ = backend_switch_decode(stream, z_indexes, None, table_set,
                                   z.residuals.shape)
assert np.array_equal(decoded, z.residuals)
print(f"z coded at {report.bits_per_symbol:.4f} bits/symbol with reused tables")

# Channel pruning drops whole channels up front; restore pads them
# back as zeros in their original slots.
channel_mask = np.array([1, 0, 1, 1], dtype=bool)
pruned = prune_hyper_channels(z, channel_mask)
print("pruned block shape:", pruned.residuals.shape)
restored = restore_pruned_channels(pruned, channel_mask)
assert np.array_equal(restored.residuals[channel_mask], z.residuals[channel_mask])
assert not restored.residuals[~channel_mask].any()
print("restore keeps surviving channels exact, zero-fills the dropped one")
