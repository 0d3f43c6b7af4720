use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const LABEL_A: &str = "1429MR0070680170702598E01_DRCL.LBL";
const LABEL_B: &str = "1429MR0070680180702599E01_DRCL.LBL";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn mars_coloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mars-coloc"))
        .args(args)
        .env_remove("MARS_COLOC_CACHE")
        .output()
        .expect("run mars-coloc")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Run {
    _dir: tempfile::TempDir,
    out: PathBuf,
    config: PathBuf,
}

fn setup() -> Run {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    Run {
        config: fixtures().join("config.json"),
        out,
        _dir: dir,
    }
}

impl Run {
    fn run(&self, extra: &[&str]) -> Output {
        let mut args = vec!["--config", path(&self.config), "--out-dir", path(&self.out)];
        args.extend_from_slice(extra);
        mars_coloc(&args)
    }
}

#[test]
fn colocate_writes_all_artifacts() {
    let r = setup();
    let a = fixtures().join(LABEL_A);
    let b = fixtures().join(LABEL_B);
    let o = r.run(&["colocate", path(&a), path(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for stem in ["1429MR0070680170702598E01_DRCL", "1429MR0070680180702599E01_DRCL"] {
        assert!(r.out.join(format!("{stem}.viewshed.asc")).is_file());
        let gj: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(r.out.join(format!("{stem}.viewshed.geojson"))).unwrap()).unwrap();
        assert_eq!(gj["type"], "FeatureCollection");
    }
    let csv = std::fs::read_to_string(r.out.join("viewpoints.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(stdout(&o).contains("visible cells"));
}

#[test]
fn geotiff_output_and_overlap() {
    let r = setup();
    let a = fixtures().join(LABEL_A);
    let b = fixtures().join(LABEL_B);
    let o = r.run(&["--format", "geotiff", "colocate", path(&a), path(&b)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let ta = r.out.join("1429MR0070680170702598E01_DRCL.viewshed.tif");
    let tb = r.out.join("1429MR0070680180702599E01_DRCL.viewshed.tif");
    let ov = r.out.join("overlap.tif");
    let o = r.run(&["--format", "geotiff", "overlap", path(&ta), path(&tb), "--out", path(&ov)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let jaccard: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("jaccard: "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(jaccard > 0.0 && jaccard < 1.0, "{text}");
    assert!(ov.is_file() && r.out.join("overlap.geojson").is_file());
}

#[test]
fn partial_and_total_failure_codes() {
    let r = setup();
    let good = fixtures().join(LABEL_A);
    let missing = r.out.with_file_name("missing.LBL");
    let o = r.run(&["colocate", path(&good), path(&missing)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("missing.LBL"));
    assert!(r.out.join("viewpoints.csv").is_file());

    let o = r.run(&["colocate", path(&missing)]);
    assert_eq!(code(&o), 1);

    // A label whose site/drive is not in the table.
    let text = std::fs::read_to_string(&good).unwrap();
    let unknown = r.out.with_file_name("1429MR0000000000000000E01_DRCL.LBL");
    std::fs::write(
        &unknown,
        text.replace("(56, 1632,", "(56, 9998,").replace("0170702598E01", "0000000000000"),
    )
    .unwrap();
    let o = r.run(&["colocate", path(&good), path(&unknown)]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("1429MR0000000000000000E01_DRCL.LBL"));
    assert!(stdout(&o).contains(LABEL_A));
    assert!(!r.out.join("1429MR0000000000000000E01_DRCL.viewshed.asc").exists());
    let o = r.run(&["--fallback", "nearest-preceding", "colocate", path(&unknown)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warn"), "{}", stderr(&o));

    // Same image twice: the second copy is rejected.
    let o = r.run(&["colocate", path(&good), path(&good)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("duplicate"));

    // A PDS4 label under the Curiosity profile is a per-label error.
    let xml = fixtures().join("ZLF_0089_0679018450_265RAD_N0040048ZCAM08050_034085J03.xml");
    let o = r.run(&["colocate", path(&xml)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn configuration_errors_exit_one() {
    let r = setup();
    let good = fixtures().join(LABEL_A);
    let o = r.run(&["--dem", "/nonexistent/dem.asc", "colocate", path(&good)]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("DEM"));
    let o = r.run(&["--radius=-5", "colocate", path(&good)]);
    assert_eq!(code(&o), 1);
    let o = mars_coloc(&["--config", "/nonexistent.json", "colocate", path(&good)]);
    assert_eq!(code(&o), 1);
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&mars_coloc(&[])), 64);
    assert_eq!(code(&mars_coloc(&["colocate"])), 64);
    assert_eq!(code(&mars_coloc(&["--mode", "fast", "colocate", "x.LBL"])), 64);
    assert_eq!(code(&mars_coloc(&["--help"])), 0);
    assert_eq!(code(&mars_coloc(&["--version"])), 0);
}

#[test]
fn flags_override_config_file() {
    let r = setup();
    let good = fixtures().join(LABEL_A);
    let o = r.run(&["--radius", "25", "--observer-height", "1.5", "viewpoint", path(&good)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(r.out.join("viewpoints.csv")).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!((row[3], row[4]), ("1.500000", "25.000000"));
    assert_eq!((row[5], row[6]), ("0.000000", "90.000000"));
    // viewpoint alone computes nothing
    assert!(!r.out.join("1429MR0070680170702598E01_DRCL.viewshed.asc").exists());
}

#[test]
fn viewpoint_then_viewshed() {
    let r = setup();
    let a = fixtures().join(LABEL_A);
    let b = fixtures().join(LABEL_B);
    assert_eq!(code(&r.run(&["viewpoint", path(&a), path(&b)])), 0);
    let csv = r.out.join("viewpoints.csv");
    let o = r.run(&["viewshed", "--viewpoints", path(&csv)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let staged = std::fs::read(r.out.join("1429MR0070680170702598E01_DRCL.viewshed.asc")).unwrap();

    let direct = setup();
    assert_eq!(code(&direct.run(&["colocate", path(&a)])), 0);
    let once = std::fs::read(direct.out.join("1429MR0070680170702598E01_DRCL.viewshed.asc")).unwrap();
    assert_eq!(staged, once);
}

/// Serves `files` over HTTP/1.0 and 404s everything else; returns the base URL.
fn serve(files: Vec<(String, Vec<u8>)>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut line = String::new();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            reader.read_line(&mut line).unwrap();
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                    break;
                }
            }
            let target = line.split_whitespace().nth(1).unwrap_or("").to_string();
            match files.iter().find(|(p, _)| *p == target) {
                Some((_, body)) => {
                    write!(stream, "HTTP/1.0 200 OK\r\nContent-Length: {}\r\n\r\n", body.len()).unwrap();
                    stream.write_all(body).unwrap();
                }
                None => stream.write_all(b"HTTP/1.0 404 Not Found\r\nContent-Length: 0\r\n\r\n").unwrap(),
            }
        }
    });
    format!("http://{addr}")
}

#[test]
fn fetch_uses_env_cache_and_reports_missing() {
    let id = "1429MR0070680170702598E01_DRCL";
    let base = serve(vec![
        (format!("/msl/01429/{id}.LBL"), b"PDS_VERSION_ID = PDS3\nEND\n".to_vec()),
        (format!("/msl/01429/{id}.IMG"), vec![7u8; 64]),
    ]);
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("fetch.json");
    std::fs::write(
        &config,
        format!(r#"{{"fetch": {{"curiosity_base_url": "{base}/msl/{{sol}}"}}}}"#),
    )
    .unwrap();
    let cache = dir.path().join("env-cache");
    let fetch = |ids: &[&str]| {
        let mut args = vec!["--config", path(&config), "fetch"];
        args.extend_from_slice(ids);
        Command::new(env!("CARGO_BIN_EXE_mars-coloc"))
            .args(&args)
            .env("MARS_COLOC_CACHE", &cache)
            .output()
            .unwrap()
    };
    let o = fetch(&[id]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("downloaded"));
    assert_eq!(std::fs::read(cache.join("curiosity").join(id).join(format!("{id}.IMG"))).unwrap(), vec![7u8; 64]);

    let o = fetch(&[id]);
    assert!(stdout(&o).contains("cached"));

    let o = fetch(&[id, "0001MR0000000000000000E01_DRCL"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("not found"));
}
