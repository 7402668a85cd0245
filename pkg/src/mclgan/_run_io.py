from __future__ import annotations
import logging
import os
from typing import TYPE_CHECKING
import numpy as np
import pandas as pd
from .nets import save_checkpoint

if TYPE_CHECKING:
    from .trainer import RunLog, TrainState

logger = logging.getLogger("mclgan")


def metrics_table(self: RunLog) -> pd.DataFrame:
    """One row per evaluation record: step, loss components, coverage, hq_ratio, F8, F1_8, entropy, active_disc."""
    return pd.DataFrame([record.as_row() for record in self.records])


def losses_table(self: RunLog) -> pd.DataFrame:
    """Loss components of every training step (step 1 is the first update)."""
    table = pd.DataFrame(self.losses)
    table.insert(0, "step", np.arange(1, len(table) + 1))
    return table


def utilization_table(self: RunLog, step: int) -> pd.DataFrame:
    """Expert assignment counts and shares per discriminator in the window before `step`."""
    counts = self.utilization[step]
    total = counts.sum()
    return pd.DataFrame(
        {
            "discriminator": np.arange(len(counts)),
            "count": counts,
            "share": counts / total if total else np.zeros(len(counts)),
        }
    )


def checkpoint_arrays(self: RunLog, state: TrainState) -> dict[str, np.ndarray]:
    """Copies of the generator and discriminator parameters, prefixed with their network."""
    arrays = {name: p.copy() for name, p in state.generator.to_arrays("generator.").items()}
    arrays.update((name, p.copy()) for name, p in state.discriminator.to_arrays("discriminator.").items())
    return arrays


def write_outputs(self: RunLog, out_dir: str):
    """Writes all tables, snapshots, checkpoints and the config echo of the run to out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    self.metrics_table().to_csv(os.path.join(out_dir, "metrics.csv"), index=False)
    self.losses_table().to_csv(os.path.join(out_dir, "losses.csv"), index=False)
    for step, frame in self.snapshots.items():
        frame.to_csv(os.path.join(out_dir, f"snapshot_{step}.csv"), index=False)
    for step in self.utilization:
        self.utilization_table(step).to_csv(os.path.join(out_dir, f"utilization_{step}.csv"), index=False)
    final_step = max(self.checkpoints)
    for step, arrays in self.checkpoints.items():
        path = os.path.join(out_dir, f"checkpoint_{step}.mclg")
        save_checkpoint(path, arrays)
        if step == final_step:
            self.checkpoint_path = path
    self.config.save(os.path.join(out_dir, "config.echo"))
    logger.info("wrote %s records, %s snapshots and %s checkpoints to %s", len(self.records), len(self.snapshots), len(self.checkpoints), out_dir)
