//! Spatial channel queries on rendered spectra: multipath extraction,
//! array steering and matched beams, and incident-field queries for
//! reconfigurable surfaces.

mod array;
mod extract;
mod report;

pub use array::{array_gain, matched_beam, steering_vector, ArrayGeometry, ArrayKind};
pub use extract::extract_mpcs;
pub use report::{
    beamform_report, query_mpcs, ris_incident_query, BeamformReport, MpcEntry, OracleComparison,
    QueryConfig,
};
