"""Global constants and named presets."""

import os

FRAME_RATE = 60.0
DT = 1.0 / FRAME_RATE

# World is y-up, x-left, z-forward; gravity points down.
GRAVITY = (0.0, -9.81, 0.0)

# Standing height of the template body (T-pose, heels on the ground).
TEMPLATE_HEIGHT_M = 1.70

# Uniform body density used to convert voxel volume to mass.
BODY_DENSITY_KG_M3 = 1000.0

# Default voxel edge length for mass-property computation.
VOXEL_RES_M = 0.02

# Shape augmentation range: multiplies height_scale.
AUGMENT_SCALE_MIN = 0.5
AUGMENT_SCALE_MAX = 1.2

# A foot vertex moving less than this between frames counts as stationary.
STATIONARY_THRESHOLD_M = 0.005

# Shape refinement window (frames).
SHAPE_WINDOW = 60

SENSOR_NAMES = ("left_wrist", "right_wrist", "left_lower_leg",
                "right_lower_leg", "head", "waist")
NUM_SENSORS = 6
ROOT_SENSOR = 5  # waist

DATA_ROOT_ENV = "SHAPEMOCAP_DATA_ROOT"


def data_root(default="."):
    return os.environ.get(DATA_ROOT_ENV, default)


# Network presets.  "desk" trains in minutes on a laptop CPU; "paper"
# mirrors the full-scale setup and is kept for completeness.
PRESETS = {
    "desk": {
        "hidden_dim": 64,
        "batch_size": 32,
        "shape_hidden": 128,
        "dropout": 0.4,
        "tbptt_window": 60,
    },
    "paper": {
        "hidden_dim": 256,
        "batch_size": 256,
        "shape_hidden": 512,
        "dropout": 0.4,
        "tbptt_window": 60,
    },
}
