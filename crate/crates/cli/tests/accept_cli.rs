use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nr_eirp_cli::output::parse_manifest;

fn nr_eirp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nr-eirp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("NR_EIRP_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn codebook_manifest_has_2048_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nr_eirp(&["codebook"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_manifest(&fs::read_to_string(tmp.path().join("codebook.jsonl")).unwrap()).unwrap();
    assert_eq!(rows.len(), 2048);
    assert_eq!(rows[0].matrix().unwrap().w.shape(), (32, 2));
    let prov: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("provenance.json")).unwrap()).unwrap();
    assert_eq!(prov["subcommand"], "codebook");
    assert_eq!(prov["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn single_pattern_covers_the_full_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[grid]\nreference = \"per-pattern-peak\"\n");
    let o = nr_eirp(&["pattern", "--pm-index", "0", "--config", &cfg], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("pattern_pm0.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "theta_deg,phi_deg,eirp_db");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 181 * 361);
    assert!(rows.iter().any(|r| r.ends_with(",0.00")));
}

#[test]
fn empty_nulling_subset_is_a_warning() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nr_eirp(&["null", "--epsilon-db", "-200", "--target-el", "6", "--target-az", "5"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("null_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["retained"], 0);
    assert_eq!(summary["empty_subset"], true);
    assert!(parse_manifest(&fs::read_to_string(tmp.path().join("subset.jsonl")).unwrap()).unwrap().is_empty());
}

#[test]
fn config_errors_exit_2_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[panel]\nm1 = 2\ncolour = \"red\"\n");
    let out = tmp.path().join("o");
    let o = nr_eirp(&["codebook", "--config", &cfg], &out);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(!out.join("codebook.jsonl").exists());
}

#[test]
fn missing_ssb_section_leaves_no_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let o = nr_eirp(&["pattern", "--ssb", "0"], &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists() || fs::read_dir(&out).unwrap().next().is_none());
}

#[test]
fn output_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_nr-eirp"))
        .arg("codebook")
        .env("NR_EIRP_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(tmp.path().join("codebook.jsonl").exists());
}

#[test]
fn median_cut_and_cdf_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[grid]\nresolution_deg = 2.0\n\n[ssb]\npreset = \"ssb-332\"\n\n[[nulling]]\ntheta_deg = 6.0\nphi_deg = 6.0\nepsilon_db = -15.0\nalgorithm = \"threshold\"\n\n[[nulling]]\ntheta_deg = 6.0\nphi_deg = 6.0\nalgorithm = \"hpbw\"\n",
    );
    let o = nr_eirp(&["median-cut", "--config", &cfg], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("median_cut.csv")).unwrap();
    assert!(text.starts_with("angle_deg,median_db,scenario_label\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 91);
    let o = nr_eirp(&["cdf", "--config", &cfg], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["cdf_full.csv", "cdf_0_threshold_-15.csv", "cdf_1_hpbw_and.csv", "cdf_ssb_pm.csv"] {
        let t = fs::read_to_string(tmp.path().join(f)).unwrap();
        assert!(t.starts_with("eirp_db,cum_prob\n"), "{f}");
        assert!(t.trim_end().ends_with(",1"), "{f}");
    }
    let o = nr_eirp(&["average-map", "--ssb-pm", "--config", &cfg], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(tmp.path().join("average_map_ssb_pm.csv")).unwrap().lines().count(), 1 + 91 * 181);
}

#[test]
fn ber_csv_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[channel]\nn_subcarriers = 48\n\n[link]\nmodulation = \"16QAM\"\nn_layers = 2\nn_rx = 4\nsnr_db = [0.0, 10.0]\nn_drops = 3\npolicy = \"pmi-full\"\ncsi = \"estimated\"\nseed = 5\n",
    );
    let o = nr_eirp(&["ber", "--config", &cfg], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("ber.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "snr_db,ber,bit_errors,bits_total,policy,csi");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.00,") && lines[1].ends_with(",1152,pmi-full,estimated"));
}
