use mars_coloc::raster::{load_dem, load_visibility, synth, write_dem, write_visibility, RasterFormat};
use mars_coloc::{compute_viewshed, FovSector, GeoTransform, RoverPose, Viewpoint, ViewshedMode, ViewshedParams};

fn viewshed() -> mars_coloc::VisibilityRaster {
    let dem = synth::gaussian_hills(synth::square(48, 2.0), 8, 11).with_cell(5, 30, -9999.0);
    let vp = Viewpoint {
        pose: RoverPose::at(47.0, 49.0),
        sector: FovSector::everything(),
        observer_height_m: 2.0,
        radius_m: 60.0,
        image_id: "io".into(),
        warnings: vec![],
    };
    compute_viewshed(&dem, &ViewshedParams::new(vp, ViewshedMode::Exact)).unwrap()
}

#[test]
fn visibility_round_trips_in_both_formats() {
    let vs = viewshed();
    let dir = tempfile::tempdir().unwrap();
    for format in [RasterFormat::Ascii, RasterFormat::Geotiff] {
        let path = dir.path().join(format!("v.{}", format.extension()));
        write_visibility(&vs, &path, format).unwrap();
        let back = load_visibility(&path).unwrap();
        assert_eq!(back.transform, vs.transform, "{format:?}");
        assert_eq!(back.cells(), vs.cells(), "{format:?}");
    }
}

#[test]
fn dem_round_trips_in_both_formats() {
    let t = GeoTransform::new(1000.0, 2000.0, 0.5, 20, 30).unwrap();
    let dem = synth::gaussian_hills(t, 5, 3).with_cell(3, 4, -9999.0);
    let dir = tempfile::tempdir().unwrap();
    for format in [RasterFormat::Ascii, RasterFormat::Geotiff] {
        let path = dir.path().join(format!("d.{}", format.extension()));
        write_dem(&dem, &path, format).unwrap();
        let back = load_dem(&path).unwrap();
        assert_eq!(back.transform, dem.transform, "{format:?}");
        assert_eq!(back.get(3, 4), None, "{format:?}");
        assert!(back.is_nodata(back.elevations()[3 * 30 + 4]), "{format:?}");
        for r in 0..20 {
            for c in 0..30 {
                if (r, c) != (3, 4) {
                    assert_eq!(back.get(r, c), dem.get(r, c), "{format:?} ({r}, {c})");
                }
            }
        }
    }
}

#[test]
fn fixture_dem_loads() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/flat_dem.asc");
    let dem = load_dem(path).unwrap();
    assert_eq!((dem.rows(), dem.cols(), dem.transform.pixel_size), (128, 128, 1.0));
    assert_eq!(dem.transform.origin_northing, 128.0);
    assert!(dem.elevations().iter().all(|&z| z == 0.0));
}

#[test]
fn unreadable_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_dem(dir.path().join("nope.asc")).is_err());
    let junk = dir.path().join("junk.tif");
    std::fs::write(&junk, b"not a tiff").unwrap();
    assert!(load_dem(&junk).is_err());
    let asc = dir.path().join("bad.asc");
    std::fs::write(&asc, "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 2 3\n").unwrap();
    assert!(load_dem(&asc).is_err());
}
