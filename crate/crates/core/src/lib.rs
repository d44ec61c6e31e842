//! Unlimited sampling of spike trains: modulo front end, kernel models,
//! exact recovery under a sampling-step bound, and SR-IterSiS for quantized
//! folded samples.

pub mod bench;
pub mod error;
pub mod forward;
pub mod front_end;
pub mod io;
pub mod itersis;
pub mod kernels;
pub mod linalg;
pub mod rng;
pub mod spectral;
pub mod theorem1;

pub use error::{Result, UsfError};
pub use forward::{synthesize, SampledSignal, SpikeTrain};
pub use front_end::{acquire, modulo_fold, AcquisitionConfig, FoldedSignal, Mode, ResidueModel};
pub use itersis::{itersis_recover, ItersisConfig, ItersisResult};
pub use kernels::KernelModel;
pub use theorem1::{max_sampling_step, recover_exact, Theorem1Params};
