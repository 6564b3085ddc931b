//! Software receiver for the BDS PPP-B2b correction signal.
//!
//! Signal processing and decoding are generic over [`Real`]; the aliases
//! below fix the scalar to `f32` or `f64`.

pub mod crc24q;
pub mod framing;
pub mod gf64;
pub mod ldpc;
pub mod pipeline;
pub mod pppmsg;
pub mod prncode;
pub mod rfchain;
pub mod scalar;

pub use scalar::Real;

pub type SampleBlockF32 = rfchain::SampleBlock<f32>;
pub type SampleBlockF64 = rfchain::SampleBlock<f64>;
pub type SimulatorF32 = rfchain::Simulator<f32>;
pub type SimulatorF64 = rfchain::Simulator<f64>;
pub type TrackerF32 = rfchain::Tracker<f32>;
pub type TrackerF64 = rfchain::Tracker<f64>;
pub type ReceiverF32<'a> = pipeline::Receiver<'a, f32>;
pub type ReceiverF64<'a> = pipeline::Receiver<'a, f64>;
pub type ReceivedSequenceF32 = ldpc::ReceivedSequence<f32>;
pub type ReceivedSequenceF64 = ldpc::ReceivedSequence<f64>;
