//! Single-user downlink MIMO link simulation.

pub mod equalizer;
pub mod estimation;
pub mod precoding;
pub mod qam;
pub mod sim;

pub use equalizer::{mmse_equalize, MmseFilter};
pub use estimation::{ls_estimate, pilot_positions};
pub use precoding::{pmi_select, svd_precoder, PmiSearch};
pub use qam::{hard_demap, qam_map, Modulation};
pub use sim::{run_ber, BerPoint, Csi, LinkConfig, PrecoderPolicy};
