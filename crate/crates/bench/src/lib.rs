//! Shared inputs for the benchmarks.

use mars_coloc::raster::synth;
use mars_coloc::{Dem, FovSector, RoverPose, Viewpoint};

/// Seeded hilly terrain, `size`² cells of 1 m.
pub fn terrain(size: usize) -> Dem {
    synth::gaussian_hills(synth::square(size, 1.0), size / 32 + 8, 42)
}

/// Observer at the center of a `size`² grid.
pub fn centered(size: usize, sector: FovSector, radius_m: f64) -> Viewpoint {
    let c = size as f64 / 2.0 + 0.5;
    Viewpoint {
        pose: RoverPose::at(c, c),
        sector,
        observer_height_m: 2.0,
        radius_m,
        image_id: "bench".into(),
        warnings: vec![],
    }
}

/// Sector `left..right` with an unrestricted elevation band.
pub fn arc(left: f64, right: f64) -> FovSector {
    FovSector {
        azimuth_left_deg: left,
        azimuth_right_deg: right,
        full_circle: false,
        ..FovSector::everything()
    }
}

/// A PDS3 label shaped like a Curiosity Mastcam product.
pub fn pds3_label() -> String {
    let mut s = String::from("PDS_VERSION_ID = PDS3\nPRODUCT_ID = \"1429MR0070680170702598E01_DRCL\"\n");
    s.push_str(
        "ROVER_MOTION_COUNTER_NAME = (\"SITE\", \"DRIVE\", \"POSE\",\n  \"ARM\", \"CHIMRA\", \"DRILL\",\n  \"RSM\", \"HGA\",\n  \"DRT\", \"IC\")\n",
    );
    s.push_str("ROVER_MOTION_COUNTER = (56, 1632,\n  8, 0,\n  0, 0,\n  142, 90,\n  0, 0 )\n");
    for g in 0..40 {
        s.push_str(&format!("GROUP = FILLER_{g}\n"));
        for k in 0..12 {
            s.push_str(&format!("  KEY_{k} = {}.5 <m>\n  NAME_{k} = \"value {k}\"\n", g * k));
        }
        s.push_str(&format!("END_GROUP = FILLER_{g}\n"));
    }
    s.push_str(
        "GROUP = INSTRUMENT_STATE_PARMS\n  AZIMUTH_FOV = 5.1 <deg>\n  ELEVATION_FOV = 3.8 <deg>\nEND_GROUP = INSTRUMENT_STATE_PARMS\n\
         GROUP = SITE_DERIVED_GEOMETRY_PARMS\n  FIXED_INSTRUMENT_AZIMUTH = 93.5 <deg>\n  FIXED_INSTRUMENT_ELEVATION = -14.2 <deg>\n\
         END_GROUP = SITE_DERIVED_GEOMETRY_PARMS\nEND\n",
    );
    s
}
