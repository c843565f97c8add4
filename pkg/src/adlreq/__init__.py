"""Joint torque and velocity requirements of an upper-limb chain during
activities of daily living, with linear regressors for device sizing and a
wrist drive-axis optimizer."""
from .chain import (JOINT_NAMES, REPORTING_JOINTS, CylinderSegment, HandModel, KinematicChain,
                    LimbModel, SegmentGeometry, build_default_chain, generate_model_stack)
from .dynamics import (ObjectModel, Provenance, SpatialWrench, TorqueRecord, inverse_dynamics,
                       object_torques, object_wrench, superpose)
from .errors import (AdlReqError, CoincidentAxesError, ConfigError, DomainError, GeometryError,
                     NonRegressableError, ParseError, PercentileRefusal, WrongOperationError)
from .regression import CoefficientTable, ComboKey, fit_all, fit_lrm, predict_peak_torque
from .trajectory import (JointTrajectory, VelocityCaps, differentiate, load_trajectory,
                         lowpass_filter, slow_down)
from .wrist import DriveConfig, WristSampleSet, actuator_power, optimize

__all__ = [
    "JOINT_NAMES", "REPORTING_JOINTS", "CylinderSegment", "HandModel", "KinematicChain",
    "LimbModel", "SegmentGeometry", "build_default_chain", "generate_model_stack",
    "ObjectModel", "Provenance", "SpatialWrench", "TorqueRecord", "inverse_dynamics",
    "object_torques", "object_wrench", "superpose",
    "AdlReqError", "CoincidentAxesError", "ConfigError", "DomainError", "GeometryError",
    "NonRegressableError", "ParseError", "PercentileRefusal", "WrongOperationError",
    "CoefficientTable", "ComboKey", "fit_all", "fit_lrm", "predict_peak_torque",
    "JointTrajectory", "VelocityCaps", "differentiate", "load_trajectory", "lowpass_filter",
    "slow_down", "DriveConfig", "WristSampleSet", "actuator_power", "optimize",
]
