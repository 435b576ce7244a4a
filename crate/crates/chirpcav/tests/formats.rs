use chirpcav::config::RunConfig;
use chirpcav::output::{self, SCAN_HEADER, TRAJECTORY_HEADER};
use chirpcav::run;

/// A short scan: two weak amplitudes, zero chirp.
fn tiny_scan_config() -> RunConfig {
    let text = r#"
[scan]
mode = "equal_chirp"

[[scan.axis]]
param = "amplitude"
min = "0 au"
max = "0.05 pi"
points = 2
"#;
    RunConfig::parse(text).unwrap().config
}

fn scan_bytes(threads: usize) -> Vec<u8> {
    let cfg = tiny_scan_config();
    let spec = run::scan_spec(&cfg).unwrap();
    let result = run::scan(&spec, threads, &|_, _| {}).unwrap();
    output::scan_csv(&result, &run::point_settings(&spec)).unwrap()
}

fn is_sig17(field: &str) -> bool {
    let Some((mantissa, exp)) = field.split_once('e') else { return false };
    let mantissa = mantissa.strip_prefix('-').unwrap_or(mantissa);
    let (int, frac) = mantissa.split_once('.').unwrap_or(("", ""));
    int.len() == 1
        && frac.len() == 16
        && int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
        && exp.strip_prefix('-').unwrap_or(exp).parse::<u32>().is_ok()
}

#[test]
fn scan_csv_layout() {
    let bytes = scan_bytes(1);
    let text = String::from_utf8(bytes).unwrap();
    assert!(!text.contains('\r'));
    assert!(text.ends_with('\n'));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, SCAN_HEADER);
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(&row[0], i.to_string());
        assert_eq!(&row[1], i.to_string());
        assert_eq!(&row[2], "0");
        for k in 3..18 {
            assert!(is_sig17(&row[k]), "column {} = {:?}", SCAN_HEADER[k], &row[k]);
        }
        assert_eq!(&row[18], "ok");
        assert_eq!(&row[19], "");
    }
    // undriven point stays in the ground state
    let p0: f64 = rows[0][8].parse().unwrap();
    assert!((p0 - 1.0).abs() < 1e-12);
    let amp: f64 = rows[1][3].parse().unwrap();
    assert_eq!(amp, 0.05 * std::f64::consts::PI);
}

#[test]
fn scan_output_is_deterministic_across_thread_counts() {
    let a = scan_bytes(1);
    assert_eq!(a, scan_bytes(1));
    assert_eq!(a, scan_bytes(2));
}

#[test]
fn trajectory_csv_layout() {
    let cfg = RunConfig::parse("[pulses.plus]\namplitude = \"0.05 pi\"\n[pulses.minus]\namplitude = \"0.05 pi\"\n")
        .unwrap()
        .config;
    let r = run::simulate(&cfg).unwrap();
    let bytes = output::trajectory_csv(&r.trajectory.samples).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TRAJECTORY_HEADER.join(","));
    let mut n = 0;
    let mut last_t = f64::NEG_INFINITY;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), TRAJECTORY_HEADER.len());
        assert!(fields.iter().all(|f| is_sig17(f)), "{line}");
        let t: f64 = fields[0].parse().unwrap();
        assert!(t > last_t);
        last_t = t;
        n += 1;
    }
    assert_eq!(n, r.trajectory.samples.len());
    assert_eq!(last_t, r.window.1);
}

#[test]
fn pulse_csv_spans_the_window() {
    let cfg = RunConfig::parse("[pulses.plus]\namplitude = \"1 pi\"\nbeta = \"120 ns^2\"\n").unwrap().config;
    let s = run::setup(&cfg).unwrap();
    let (pulses, _) = run::pulses(&cfg, &s.levels).unwrap();
    let bytes = output::pulse_csv(&pulses, (-1e9, 1e9), 11).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let rows: Vec<Vec<f64>> =
        text.lines().skip(1).map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 11);
    assert_eq!(rows[0][0], -1e9);
    assert_eq!(rows[10][0], 1e9);
    for r in &rows {
        assert_eq!(r[2], 0.0);
        assert_eq!(r[3], r[1] + r[2]);
    }
}

#[test]
fn manifest_records_schemas_digests_and_config() {
    let cfg = tiny_scan_config();
    let resolved = cfg.to_toml();
    let files =
        vec![output::OutputFile { name: "scan.csv".into(), schema: output::SCAN_SCHEMA, bytes: b"a\n".to_vec() }];
    let info = output::ManifestInfo {
        command: "scan",
        resolved_config: &resolved,
        warnings: &[],
        wall_time_s: 1.5,
        threads: 3,
    };
    let m = output::manifest(&info, &files).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&m.bytes).unwrap();
    assert_eq!(v["schema"], output::MANIFEST_SCHEMA);
    assert_eq!(v["files"][0]["schema"], "chirpcav-scan/1");
    assert_eq!(v["files"][0]["sha256"], output::sha256_hex(b"a\n"));
    assert_eq!(v["config_sha256"], output::sha256_hex(resolved.as_bytes()));
    let back = RunConfig::parse(v["resolved_config"].as_str().unwrap()).unwrap().config;
    assert_eq!(back, cfg);
    assert_eq!(v["units"]["ns2_to_au2"], chirpcav_core::units::NS2_TO_AU2);
}
