pub mod crossbar;
pub mod device;
pub mod error;
pub mod harness;
pub mod network;
pub mod oracle;
pub mod waveform;

pub use error::{Error, Result};
