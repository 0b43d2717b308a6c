"""Steering-angle and speed prediction from frame sequences.

Library layout:

- :mod:`steerkit.tensor` -- fp64 tensors with reverse-mode autodiff
- :mod:`steerkit.imaging` -- PPM I/O, dense optical flow, augmentation
- :mod:`steerkit.models` -- DAVE2, residual regressor, CNN-LSTM and the
  dual-branch RGB/flow transformer (plus its flow-ablated variant)
- :mod:`steerkit.training` -- losses, Adam, schedule, epoch loop
- :mod:`steerkit.data` -- drive-index reading, sequence assembly, and a
  synthetic road generator for desk-scale ground truth
- :mod:`steerkit.evaluation` -- test RMSE, output smoothing, exports
- :mod:`steerkit.report` -- matplotlib figures next to the CSV outputs
- :mod:`steerkit.cli` -- the ``steerkit`` command
"""

__version__ = "0.1.0"
