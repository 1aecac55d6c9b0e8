"""Warp-based gaze redirection and few-shot gaze estimator adaptation."""

from ._core import (
    EYE_HEIGHT,
    EYE_WIDTH,
    Domain,
    Estimator,
    EyeSample,
    GazeAngles,
    GazeOffset,
    HeadPose,
    IllumParams,
    PersonProfile,
    Redirector,
    angular_error_deg,
    cycle_loss,
    deg_to_rad,
    gaze_redirection_loss,
    gaze_to_vec,
    identity_field,
    make_illum,
    rad_to_deg,
    redirection_loss,
    render,
    sample_bilinear,
    sample_profile,
)

__version__ = "1.0.0"

__all__ = [
    "EYE_HEIGHT",
    "EYE_WIDTH",
    "Domain",
    "Estimator",
    "EyeSample",
    "GazeAngles",
    "GazeOffset",
    "HeadPose",
    "IllumParams",
    "PersonProfile",
    "Redirector",
    "angular_error_deg",
    "cycle_loss",
    "deg_to_rad",
    "gaze_redirection_loss",
    "gaze_to_vec",
    "identity_field",
    "make_illum",
    "rad_to_deg",
    "redirection_loss",
    "render",
    "sample_bilinear",
    "sample_profile",
]
