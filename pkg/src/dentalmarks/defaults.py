"""Default pipeline constants."""

# distance-map clamp, mm
TAU_MM = 15.0

# points kept by vertex stratification
SAMPLE_SIZE = 64_000

# NMS calibration grids
K_GRID = (6, 10, 13, 17, 21, 25, 28, 32)
T_GRID = tuple(round(0.1 * i, 10) for i in range(1, 9))
# raw (unsharpened) maps live in mm, so their threshold grid does too
RAW_T_GRID = tuple(round(0.25 * i, 10) for i in range(1, 13))

# evaluation distance thresholds, mm
SWEEP_MIN = 0.0
SWEEP_MAX = 2.0
SWEEP_STEP = 0.05

# augmentation ranges
ROTATION_RANGE_RAD = 0.5
TRANSLATION_RANGE_MM = 5.0
SCALE_RANGE = (0.8, 1.2)
FFD_DISPLACEMENT_MM = 5.0
FFD_GRID = (3, 3, 3)
FFD_COPIES = 2


def threshold_grid(t_min=SWEEP_MIN, t_max=SWEEP_MAX, step=SWEEP_STEP):
    """Inclusive, evenly spaced thresholds from ``t_min`` to ``t_max``.

    Values are rounded to 10 decimals so grid points such as 1.0 are exact.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(round((t_max - t_min) / step))
    if t_min + n * step > t_max + 1e-9:
        n -= 1
    return tuple(round(t_min + i * step, 10) for i in range(n + 1))


THRESHOLD_SWEEP = threshold_grid()
