"""Training the two weight estimators on a small corpus.

The phase network learns referenced phases under a circular loss; the
magnitude network learns power-dB values under RMSE. This demo keeps the
corpus and networks small so it finishes in under a minute; the full desk
recipe just scales the same calls up.
"""

import numpy as np

from ncbf.array_model import reference_array
from ncbf.datagen import generate_dataset
from ncbf.neural import (
    LOSS_CMAE,
    LOSS_RMSE,
    TrainConfig,
    forward,
    init_model,
    reconstruct_weights,
    train,
)

cfg = reference_array()
ds = generate_dataset(cfg, 4000, seed=7)
arch = (6, 64, 64, 24)

phase_model, phase_hist = train(
    init_model(arch, seed=0),
    ds,
    TrainConfig(loss_kind=LOSS_CMAE, epochs=15, batch_size=256,
                learning_rate=0.01, seed=0),
)
mag_model, mag_hist = train(
    init_model(arch, seed=1),
    ds,
    TrainConfig(loss_kind=LOSS_RMSE, epochs=15, batch_size=256,
                learning_rate=0.001, seed=1),
)

print("epoch  lr        cmae(train/test)   rmse(train/test)")
for e in range(0, 15, 2):
    print(f"{e:5d}  {phase_hist.learning_rates[e]:.5f}  "
          f"{phase_hist.train_loss[e]:.3f} / {phase_hist.test_loss[e]:.3f}      "
          f"{mag_hist.train_loss[e]:.3f} / {mag_hist.test_loss[e]:.3f}")
print(f"final  test CMAE {phase_hist.test_loss[-1]:.3f} rad, "
      f"test RMSE {mag_hist.test_loss[-1]:.3f} dB")

# predictions decode back into a unit-power weight vector
x = ds.features[:1].astype(np.float64)
w = reconstruct_weights(forward(phase_model, x)[0], forward(mag_model, x)[0])
print(f"reconstructed weights: {w.num_elements} entries, "
      f"power {np.sum(np.abs(w.entries) ** 2):.6f}")
