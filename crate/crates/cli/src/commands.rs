//! Subcommand bodies. Each returns the files it wants written.

use nr_eirp::codebook::{generate_codebook, PrecodingMatrix};
use nr_eirp::geometry::build_layout;
use nr_eirp::linksim::run_ber;
use nr_eirp::nulling::{self, subset_median_at, Algorithm, HpbwLogic, NullingRequest, PmSubset};
use nr_eirp::radiation::{pattern_for_pm, ssb_pattern, ssb_set_composite, PatternStack, RadiationPattern};
use nr_eirp::statistics::{cdf_at_direction, median_cut, Cut, EmpiricalCdf};
use serde_json::json;

use crate::config::Scenario;
use crate::output::{csv, db2, emit_manifest, sig6, ManifestRow};
use crate::AppError;

pub type Files = Vec<(String, String)>;

fn rt(e: nr_eirp::Error) -> AppError {
    AppError::Runtime(e.to_string())
}

fn book(s: &Scenario) -> Result<Vec<PrecodingMatrix>, AppError> {
    generate_codebook(&s.codebook).map_err(rt)
}

fn stack(s: &Scenario, book: &[PrecodingMatrix]) -> Result<PatternStack, AppError> {
    let layout = build_layout(&s.panel).map_err(rt)?;
    PatternStack::build(&layout, &s.element, book, &s.grid, s.reference).map_err(rt)
}

fn pattern_csv(p: &RadiationPattern) -> String {
    csv(
        &["theta_deg", "phi_deg", "eirp_db"],
        p.grid.directions().zip(&p.eirp_db).map(|((t, ph), v)| vec![sig6(t), sig6(ph), db2(*v)]),
    )
}

pub fn codebook(s: &Scenario) -> Result<Files, AppError> {
    let book = book(s)?;
    let rows: Vec<ManifestRow> = book.iter().enumerate().map(|(i, m)| ManifestRow::new(i, m.index, Some(m))).collect();
    Ok(vec![("codebook.jsonl".into(), emit_manifest(&rows))])
}

pub fn pattern(s: &Scenario, pm_index: Option<usize>, ssb_index: Option<usize>) -> Result<Files, AppError> {
    let layout = build_layout(&s.panel).map_err(rt)?;
    let (name, p) = match (pm_index, ssb_index) {
        (Some(i), None) => {
            let book = book(s)?;
            let w = book
                .get(i)
                .ok_or_else(|| AppError::Config(format!("--pm-index {i} outside codebook of {}", book.len())))?;
            // A single-pattern global maximum needs the whole codebook.
            let p = if s.reference == nr_eirp::radiation::Reference::GlobalMax {
                stack(s, &book)?.pattern(i)
            } else {
                pattern_for_pm(&layout, &s.element, w, &s.grid, s.reference).map_err(rt)?
            };
            (format!("pattern_pm{i}.csv"), p)
        }
        (None, Some(k)) => {
            let beams = &s.ssb.as_ref().ok_or_else(|| AppError::Config("--ssb needs an [ssb] section".into()))?.0;
            let beam = beams
                .get(k)
                .ok_or_else(|| AppError::Config(format!("--ssb {k} outside the {} SSB beams", beams.len())))?;
            (format!("pattern_ssb{k}.csv"), ssb_pattern(&layout, &s.element, beam, &s.grid).map_err(rt)?)
        }
        _ => return Err(AppError::Config("give exactly one of --pm-index or --ssb".into())),
    };
    Ok(vec![(name, pattern_csv(&p))])
}

fn first_target(s: &Scenario) -> (f64, f64) {
    s.nulling.first().map_or((0.0, 0.0), |r| (r.theta_i, r.phi_i))
}

pub fn average_map(s: &Scenario, with_ssb: bool) -> Result<Files, AppError> {
    let book = book(s)?;
    let st = stack(s, &book)?;
    if !with_ssb {
        return Ok(vec![("average_map.csv".into(), pattern_csv(&st.average_all().map_err(rt)?))]);
    }
    let (beams, mode) = s.ssb.as_ref().ok_or_else(|| AppError::Config("--ssb-pm needs an [ssb] section".into()))?;
    let layout = build_layout(&s.panel).map_err(rt)?;
    let ssbs = beams
        .iter()
        .map(|b| ssb_pattern(&layout, &s.element, b, &s.grid))
        .collect::<Result<Vec<_>, _>>()
        .map_err(rt)?;
    let comp = ssb_set_composite(&ssbs, &st, first_target(s), *mode).map_err(rt)?;
    Ok(vec![("average_map_ssb_pm.csv".into(), pattern_csv(&comp.pattern))])
}

fn subsets(s: &Scenario, st: &PatternStack) -> Result<Vec<PmSubset>, AppError> {
    s.nulling.iter().map(|r| nulling::select(st, r).map_err(rt)).collect()
}

fn label(r: &NullingRequest) -> String {
    match r.algorithm {
        Algorithm::Threshold => format!("threshold_{}", sig6(r.epsilon_db)),
        Algorithm::Hpbw => match r.hpbw_logic {
            HpbwLogic::AndExclude => "hpbw_and".into(),
            HpbwLogic::OrExclude => "hpbw_or".into(),
        },
    }
}

fn cdf_csv(c: &EmpiricalCdf) -> String {
    csv(&["eirp_db", "cum_prob"], c.sorted_values.iter().zip(&c.probabilities).map(|(v, p)| vec![db2(*v), sig6(*p)]))
}

pub fn cdf(s: &Scenario) -> Result<Files, AppError> {
    let book = book(s)?;
    let st = stack(s, &book)?;
    let (t, p) = first_target(s);
    let full: Vec<usize> = (0..st.len()).collect();
    let mut files = vec![("cdf_full.csv".to_string(), cdf_csv(&cdf_at_direction(&st, &full, t, p).map_err(rt)?))];
    for (k, sub) in subsets(s, &st)?.iter().enumerate() {
        if sub.is_empty() {
            eprintln!("warning: nulling entry {k} retained no codewords; CDF skipped");
            continue;
        }
        let c = cdf_at_direction(&st, &sub.retained, sub.request.theta_i, sub.request.phi_i).map_err(rt)?;
        files.push((format!("cdf_{k}_{}.csv", label(&sub.request)), cdf_csv(&c)));
    }
    if let Some((beams, mode)) = &s.ssb {
        let layout = build_layout(&s.panel).map_err(rt)?;
        let ssbs = beams
            .iter()
            .map(|b| ssb_pattern(&layout, &s.element, b, &s.grid))
            .collect::<Result<Vec<_>, _>>()
            .map_err(rt)?;
        let comp = ssb_set_composite(&ssbs, &st, (t, p), *mode).map_err(rt)?;
        files.push(("cdf_ssb_pm.csv".into(), cdf_csv(&EmpiricalCdf::new(comp.target_db).map_err(rt)?)));
    }
    Ok(files)
}

pub fn null(s: &Scenario) -> Result<Files, AppError> {
    let request = *s.nulling.first().ok_or_else(|| AppError::Config("no nulling request (config or flags)".into()))?;
    let book = book(s)?;
    let st = stack(s, &book)?;
    let sub = nulling::select(&st, &request).map_err(rt)?;
    if sub.empty {
        eprintln!("warning: nulling retained no codewords");
    }
    let full: Vec<usize> = (0..st.len()).collect();
    let before = subset_median_at(&st, &full, request.theta_i, request.phi_i).map_err(rt)?;
    let after = if sub.empty {
        None
    } else {
        Some(subset_median_at(&st, &sub.retained, request.theta_i, request.phi_i).map_err(rt)?)
    };
    let rows: Vec<ManifestRow> = sub.retained.iter().map(|&i| ManifestRow::new(i, st.indices[i], None)).collect();
    let summary = json!({
        "scenario": s.name,
        "algorithm": label(&request),
        "target_theta_deg": request.theta_i,
        "target_phi_deg": request.phi_i,
        "epsilon_db": if request.algorithm == Algorithm::Threshold { Some(request.epsilon_db) } else { None },
        "reference": s.reference,
        "codebook_size": st.len(),
        "retained": sub.len(),
        "retained_fraction": sub.retained_fraction,
        "empty_subset": sub.empty,
        "undefined_hpbw": sub.undefined_hpbw.len(),
        "median_full_db": before,
        "median_subset_db": after,
    });
    Ok(vec![
        ("subset.jsonl".into(), emit_manifest(&rows)),
        ("null_summary.json".into(), serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    ])
}

pub fn median_cut_cmd(s: &Scenario, cut: Option<Cut>) -> Result<Files, AppError> {
    let book = book(s)?;
    let st = stack(s, &book)?;
    let cut = cut.unwrap_or(Cut::Azimuth(first_target(s).1));
    let full: Vec<usize> = (0..st.len()).collect();
    let mut series = vec![("full".to_string(), median_cut(&st, &full, cut).map_err(rt)?)];
    for (k, sub) in subsets(s, &st)?.iter().enumerate() {
        if sub.is_empty() {
            eprintln!("warning: nulling entry {k} retained no codewords; cut skipped");
            continue;
        }
        series.push((format!("{k}_{}", label(&sub.request)), median_cut(&st, &sub.retained, cut).map_err(rt)?));
    }
    let rows =
        series.iter().flat_map(|(name, pts)| pts.iter().map(move |(a, m)| vec![sig6(*a), db2(*m), name.clone()]));
    Ok(vec![("median_cut.csv".into(), csv(&["angle_deg", "median_db", "scenario_label"], rows))])
}

pub fn ber(s: &Scenario) -> Result<Files, AppError> {
    let (link, subset_entry) = s.link.as_ref().ok_or_else(|| AppError::Config("ber needs a [link] section".into()))?;
    let book = book(s)?;
    let subset = if link.policy == nr_eirp::linksim::PrecoderPolicy::PmiSubset {
        let st = stack(s, &book)?;
        let sub = nulling::select(&st, &s.nulling[*subset_entry]).map_err(rt)?;
        Some(sub.retained)
    } else {
        None
    };
    let points = run_ber(link, &s.channel, &book, subset.as_deref()).map_err(rt)?;
    let rows = points.iter().map(|p| {
        vec![
            db2(p.snr_db),
            sig6(p.ber),
            p.bit_errors.to_string(),
            p.bits_total.to_string(),
            link.policy.name().to_string(),
            link.csi.name().to_string(),
        ]
    });
    Ok(vec![("ber.csv".into(), csv(&["snr_db", "ber", "bit_errors", "bits_total", "policy", "csi"], rows))])
}
