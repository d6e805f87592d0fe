"""Shape-aware sparse-inertial motion capture toolkit."""

from .body import (BodyModel, ImuMount, JointTransforms, Pose, ShapeParams,
                   Skeleton, build_body, foot_vertices, forward_kinematics,
                   skin_vertices)
from .motions import MotionSequence
from .synth import (ImuFrame, ImuSequence, PairedSample, augment_shape,
                    detect_stationary, joint_velocities, make_pairs,
                    retarget_translation, synth_imu)
from .voxels import (MassProperties, VoxelCloud, compute_mass_properties,
                     joint_com, joint_inertia, joint_mass, point_mass,
                     voxelize)

__version__ = "0.1.0"
