//! Room acoustics simulation and spectrogram-based sound source localization.
//!
//! The pipeline renders room impulse responses in a multi-room scene by
//! bidirectional path tracing, convolves them with a normalized dry sound,
//! turns the result into log-magnitude spectrograms and trains small
//! convolutional networks that localize the source to a room or to floor
//! coordinates.

pub mod audio;
pub mod dataset;
pub mod eval;
pub mod localize;
pub mod propagation;
pub mod rng;
pub mod scene;

pub use propagation::{simulate_rir, ImpulseResponse, PropagationConfig, PropagationError};
pub use scene::{load_scene, Point3, Scene, SceneError, Vec3};
