use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use loopwatch_core::detect::SPECTRUM_MAX_ORDER;
use loopwatch_core::matrix::{symbolic_powers, walk_oracle_with_suspects, MatrixError, DEFAULT_TERM_BUDGET};
use loopwatch_core::report::{self, fmt_sig};
use loopwatch_core::spectral::Spectrum;
use loopwatch_core::{
    build_error_function, build_poly_matrix, correct as correct_network, detect, normalize_orientation,
    rank_suspect_arcs, remove_suspects, sample_error_surface, spectrum as spectrum_at, BaselineTable, Coordinate,
    CorrectionResult, DetectConfig, DetectError, DiagnosticsReport, ErrorFunction, ExpPoly, SurfaceTable, Verdict,
    WeightedDigraph,
};
use serde_json::{json, Value};

use crate::{svg, CommonArgs, CoordArg, CorrectArgs, Format, OracleArgs};

const BUDGET_ENV: &str = "LOOPWATCH_TERM_BUDGET";

/// One connected component of one coordinate, orientation-normalized.
struct Unit {
    coordinate: Option<Coordinate>,
    component: usize,
    graph: WeightedDigraph,
    /// Arc index in `graph` -> row index in the input table.
    rows: Vec<usize>,
    /// Whether arc `i` of `graph` runs opposite to its input row.
    flipped: Vec<bool>,
}

impl Unit {
    fn vertex_labels(&self) -> Vec<String> {
        self.graph.vertices().iter().map(|v| v.to_string()).collect()
    }

    fn label(&self) -> String {
        match self.coordinate {
            Some(c) => format!("{c} component {}", self.component),
            None => format!("component {}", self.component),
        }
    }

    fn section(&self, body: Value) -> Value {
        report::section(self.coordinate, self.component, &self.vertex_labels(), body)
    }
}

struct Loaded {
    table: BaselineTable,
    units: Vec<Unit>,
    warnings: Vec<String>,
}

fn load(path: &Path, coord: CoordArg) -> Result<Loaded> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let table = BaselineTable::parse(&text).with_context(|| format!("{}", path.display()))?;
    let mut warnings = Vec::new();
    let coordinates: Vec<Option<Coordinate>> = if table.single_coordinate {
        if coord != CoordArg::All {
            warnings.push("single-coordinate file; --coord ignored".to_string());
        }
        vec![None]
    } else {
        match coord {
            CoordArg::X => vec![Some(Coordinate::X)],
            CoordArg::Y => vec![Some(Coordinate::Y)],
            CoordArg::Z => vec![Some(Coordinate::Z)],
            CoordArg::All => Coordinate::ALL.iter().copied().map(Some).collect(),
        }
    };
    if table.rows.is_empty() {
        warnings.push("network has no baselines; nothing to analyse".to_string());
    }

    let mut units = Vec::new();
    for coordinate in coordinates {
        let raw = table.project(coordinate.unwrap_or(Coordinate::X))?;
        if raw.order() == 0 {
            continue;
        }
        let g = normalize_orientation(&raw);
        let components = g.components();
        if components.len() > 1 {
            warnings.push(format!(
                "{}network splits into {} components; each is analysed separately",
                coordinate.map_or(String::new(), |c| format!("{c}: ")),
                components.len()
            ));
        }
        for (component, members) in components.iter().enumerate() {
            let (graph, arc_map) = g.subgraph(members);
            let flipped = arc_map
                .iter()
                .map(|&i| g.arcs()[i].tail != raw.arcs()[i].tail)
                .collect();
            units.push(Unit {
                coordinate,
                component,
                graph,
                rows: arc_map,
                flipped,
            });
        }
    }
    Ok(Loaded { table, units, warnings })
}

fn term_budget() -> Result<usize> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&b| b > 0)
            .with_context(|| format!("{BUDGET_ENV} must be a positive integer, got '{v}'")),
        Err(_) => Ok(DEFAULT_TERM_BUDGET),
    }
}

fn z_values(a: &CommonArgs) -> Vec<f64> {
    a.z_list.clone().unwrap_or_else(|| vec![a.z])
}

fn config(a: &CommonArgs, z: f64) -> Result<DetectConfig> {
    let mut cfg = DetectConfig::default().with_z(z).with_tau(a.tau);
    cfg.r_max = a.rmax;
    cfg.term_budget = term_budget()?;
    cfg.validate()?;
    Ok(cfg)
}

/// Resolves `u-v,...` against a network. Labels may contain '-', so every
/// split point is tried.
fn parse_suspects(spec: &str) -> Result<Vec<Vec<(String, String)>>> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let splits: Vec<(String, String)> = item
            .match_indices('-')
            .map(|(i, _)| (item[..i].trim().to_string(), item[i + 1..].trim().to_string()))
            .filter(|(a, b)| !a.is_empty() && !b.is_empty())
            .collect();
        if splits.is_empty() {
            bail!("bad suspect '{item}' (expected u-v)");
        }
        out.push(splits);
    }
    if out.is_empty() {
        bail!("--suspects is empty");
    }
    Ok(out)
}

/// Arc indices of the suspects that lie in `g`, or `None` if none do.
fn locate_suspects(g: &WeightedDigraph, suspects: &[Vec<(String, String)>]) -> Result<Option<Vec<usize>>> {
    let mut found = Vec::new();
    let mut missing = Vec::new();
    for candidates in suspects {
        match candidates.iter().find_map(|(a, b)| g.find_arc(a, b)) {
            Some(i) if found.contains(&i) => bail!("suspect {}-{} listed twice", candidates[0].0, candidates[0].1),
            Some(i) => found.push(i),
            None => missing.push(candidates),
        }
    }
    if found.is_empty() {
        return Ok(None);
    }
    if let Some(c) = missing.first() {
        bail!("suspects {}-{} and {} lie in different components", c[0].0, c[0].1, arc_name(g, found[0]));
    }
    Ok(Some(found))
}

fn arc_name(g: &WeightedDigraph, i: usize) -> String {
    let a = &g.arcs()[i];
    format!("{}-{}", a.tail, a.head)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn finish(command: &str, verdict: Option<Verdict>, sections: Vec<Value>, warnings: &[String]) -> Value {
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let verdict_name = verdict.map(|v| match v {
        Verdict::Clean => "clean",
        Verdict::Minor => "minor",
        Verdict::Gross => "gross",
    });
    let mut env = report::envelope(command, verdict_name, sections);
    env["warnings"] = json!(warnings);
    env
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

fn worst(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
    verdicts.into_iter().max().unwrap_or(Verdict::Clean)
}

fn exit_code(v: Verdict) -> u8 {
    v.exit_code() as u8
}

fn text_diagnostics(out: &mut String, r: &DiagnosticsReport) {
    let _ = writeln!(
        out,
        "  z = {}: {}{}",
        fmt_sig(r.series.z),
        verdict_word(r.verdict),
        r.first_failing_r.map_or(String::new(), |k| format!(", first failing r = {k}"))
    );
    let _ = writeln!(out, "    {:>3}  {:>18}  {:>18}", "r", "norm_l1", "norm_l2");
    for s in &r.series.series {
        let _ = writeln!(out, "    {:>3}  {:>18}  {:>18}", s.r, fmt_sig(s.norm), fmt_sig(s.norm_l2));
    }
    if !r.vertex_ranking.is_empty() {
        let top: Vec<String> = r
            .vertex_ranking
            .iter()
            .take(5)
            .map(|(v, d)| format!("{v} ({})", fmt_sig(*d)))
            .collect();
        let _ = writeln!(out, "    largest deviations: {}", top.join(", "));
    }
    if let Some(d) = r.spectrum_deviation {
        let _ = writeln!(
            out,
            "    spectrum deviation: {}{}",
            fmt_sig(d),
            if r.spectrum_non_real { " (non-real eigenvalues)" } else { "" }
        );
    }
}

fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Clean => "clean",
        Verdict::Minor => "minor deviations",
        Verdict::Gross => "gross error",
    }
}

pub fn check(a: &CommonArgs) -> Result<u8> {
    let zs = z_values(a);
    let configs = zs.iter().map(|&z| config(a, z)).collect::<Result<Vec<_>>>()?;
    let loaded = load(&a.input, a.coord)?;
    let mut sections = Vec::new();
    let mut verdicts = Vec::new();
    let mut text = String::new();
    for unit in &loaded.units {
        let reports = configs
            .iter()
            .map(|cfg| detect(&unit.graph, cfg))
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| unit.label())?;
        let v = worst(reports.iter().map(|r| r.verdict));
        verdicts.push(v);
        let _ = writeln!(text, "[{}] {}", unit.label(), verdict_word(v));
        for r in &reports {
            text_diagnostics(&mut text, r);
        }
        let runs: Vec<Value> = reports.iter().map(report::diagnostics_json).collect();
        sections.push(unit.section(json!({ "verdict": v, "runs": runs })));
    }
    let verdict = worst(verdicts);
    let env = finish("check", Some(verdict), sections, &loaded.warnings);
    match a.format {
        Format::Json => emit(&a.out, &json_text(&env))?,
        Format::Text => emit(&a.out, &format!("loopwatch check: {}\n{text}", verdict_word(verdict)))?,
    }
    Ok(exit_code(verdict))
}

pub fn spectrum(a: &CommonArgs) -> Result<u8> {
    let zs = z_values(a);
    let configs = zs.iter().map(|&z| config(a, z)).collect::<Result<Vec<_>>>()?;
    let loaded = load(&a.input, a.coord)?;
    let mut sections = Vec::new();
    let mut verdicts = Vec::new();
    let mut text = String::new();
    for unit in &loaded.units {
        let g = &unit.graph;
        if g.order() > SPECTRUM_MAX_ORDER {
            bail!("{}: spectra are limited to {SPECTRUM_MAX_ORDER} points, got {}", unit.label(), g.order());
        }
        let reference = spectrum_at(g, 1.0).with_context(|| unit.label())?;
        let mut at_z = Vec::new();
        let mut v = Verdict::Clean;
        for cfg in &configs {
            let s = spectrum_at(g, cfg.z).with_context(|| unit.label())?;
            let d = s.distance(&reference);
            v = v.max(detect(g, cfg).with_context(|| unit.label())?.verdict);
            at_z.push((s, d));
        }
        verdicts.push(v);
        let _ = writeln!(text, "[{}] {}", unit.label(), verdict_word(v));
        let _ = writeln!(text, "  z = 1: {}", spectrum_text(&reference));
        for (s, d) in &at_z {
            let _ = writeln!(text, "  z = {}: {}  (deviation {})", fmt_sig(s.z), spectrum_text(s), fmt_sig(*d));
        }
        sections.push(unit.section(json!({
            "verdict": v,
            "reference": report::spectrum_json(&reference, 0.0),
            "spectra": at_z.iter().map(|(s, d)| report::spectrum_json(s, *d)).collect::<Vec<_>>(),
        })));
    }
    let verdict = worst(verdicts);
    let env = finish("spectrum", Some(verdict), sections, &loaded.warnings);
    match a.format {
        Format::Json => emit(&a.out, &json_text(&env))?,
        Format::Text => emit(&a.out, &format!("loopwatch spectrum: {}\n{text}", verdict_word(verdict)))?,
    }
    Ok(exit_code(verdict))
}

fn spectrum_text(s: &Spectrum) -> String {
    let parts: Vec<String> = s
        .eigenvalues
        .iter()
        .zip(&s.imaginary)
        .map(|(re, im)| {
            let re = if re.abs() < 1e-12 { 0.0 } else { *re };
            if im.abs() > 0.0 {
                format!("{}{}{}i", fmt_sig(re), if *im < 0.0 { "-" } else { "+" }, fmt_sig(im.abs()))
            } else {
                fmt_sig(re)
            }
        })
        .collect();
    format!("[{}]", parts.join(", "))
}

/// Suffix distinguishing per-unit side files when there are several units.
fn unit_suffix(unit: &Unit, many: bool) -> String {
    if !many {
        return String::new();
    }
    match unit.coordinate {
        Some(c) => format!(".{c}.{}", unit.component),
        None => format!(".{}", unit.component),
    }
}

fn sibling(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().map_or_else(|| "network".into(), |s| s.to_string_lossy().into_owned());
    input.with_file_name(format!("{stem}{suffix}"))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    if suffix.is_empty() {
        return path.to_path_buf();
    }
    let stem = path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let ext = path.extension().map_or_else(String::new, |e| format!(".{}", e.to_string_lossy()));
    path.with_file_name(format!("{stem}{suffix}{ext}"))
}

/// Error function matching a finished correction, for surface sampling.
fn error_function_for(g: &WeightedDigraph, res: &CorrectionResult, budget: usize) -> Result<ErrorFunction> {
    match build_error_function(g, &res.suspects, res.z, res.r, budget) {
        Err(DetectError::Matrix(MatrixError::BudgetExceeded { .. })) => {
            Ok(ErrorFunction::numeric(g, &res.suspects, res.z, res.r)?)
        }
        other => Ok(other?),
    }
}

/// Automatic suspects: the best-ranked arcs whose removal keeps the network
/// connected, so each lies on a cycle.
fn auto_suspects(g: &WeightedDigraph, pre: &DiagnosticsReport, k: usize) -> Result<Vec<usize>> {
    let ranked = rank_suspect_arcs(g, pre, g.arcs().len())?;
    Ok(ranked
        .into_iter()
        .filter(|&i| remove_suspects(g, &[i]).is_ok())
        .take(k)
        .collect())
}

pub fn correct(a: &CorrectArgs) -> Result<u8> {
    let c = &a.common;
    if c.z_list.as_ref().is_some_and(|l| l.len() > 1) {
        bail!("correct uses a single z; pass --z instead of --z-list");
    }
    let cfg = config(c, z_values(c)[0])?;
    if a.r == Some(0) {
        bail!("--r must be at least 1");
    }
    if a.k == 0 {
        bail!("--k must be at least 1");
    }
    let suspects = a.suspects.as_deref().map(parse_suspects).transpose()?;
    let loaded = load(&c.input, c.coord)?;
    let mut warnings = loaded.warnings.clone();

    if let Some(list) = &suspects {
        for candidates in list {
            let anywhere = loaded
                .units
                .iter()
                .any(|u| candidates.iter().any(|(x, y)| u.graph.find_arc(x, y).is_some()));
            if !anywhere {
                bail!("suspect {}-{} is not a baseline of the network", candidates[0].0, candidates[0].1);
            }
        }
    }

    let many = loaded.units.len() > 1;
    let mut corrected_table = loaded.table.clone();
    let mut sections = Vec::new();
    let mut verdicts = Vec::new();
    let mut text = String::new();
    let mut any_correction = false;
    for unit in &loaded.units {
        let g = &unit.graph;
        let chosen = match &suspects {
            Some(list) => locate_suspects(g, list)?,
            None => {
                let pre = detect(g, &cfg).with_context(|| unit.label())?;
                if pre.verdict == Verdict::Clean {
                    None
                } else {
                    let picked = auto_suspects(g, &pre, a.k)?;
                    if picked.is_empty() {
                        warnings.push(format!("{}: no correctable arcs (all are bridges)", unit.label()));
                        None
                    } else {
                        Some(picked)
                    }
                }
            }
        };
        let Some(chosen) = chosen else {
            let pre = detect(g, &cfg).with_context(|| unit.label())?;
            verdicts.push(pre.verdict);
            let _ = writeln!(text, "[{}] {}, not corrected", unit.label(), verdict_word(pre.verdict));
            sections.push(unit.section(json!({
                "corrected": false,
                "verdict": pre.verdict,
                "report": report::diagnostics_json(&pre),
            })));
            continue;
        };

        let res = correct_network(g, &chosen, &cfg, a.r).with_context(|| unit.label())?;
        any_correction = true;
        verdicts.push(res.post_report.verdict);
        let column = unit.coordinate.map_or(0, |c| Coordinate::ALL.iter().position(|&x| x == c).unwrap());
        for &arc in &res.suspects {
            let w = res.corrected.arcs()[arc].weight;
            let row = unit.rows[arc];
            corrected_table.rows[row].deltas[column] = if unit.flipped[arc] { -w } else { w };
        }

        let mut body = report::correction_json(g, &res);
        body["corrected"] = json!(true);
        body["verdict"] = json!(res.post_report.verdict);

        let _ = writeln!(
            text,
            "[{}] {} -> {} (r = {}, z = {})",
            unit.label(),
            verdict_word(res.pre_report.verdict),
            verdict_word(res.post_report.verdict),
            res.r,
            fmt_sig(res.z)
        );
        for (&arc, dx) in res.suspects.iter().zip(&res.x_star) {
            let _ = writeln!(
                text,
                "  {}: {} {:+} = {}",
                arc_name(g, arc),
                fmt_sig(g.arcs()[arc].weight),
                report::round_sig(*dx),
                fmt_sig(res.corrected.arcs()[arc].weight)
            );
        }
        let _ = writeln!(text, "  e(0) = {}, e(x*) = {}", fmt_sig(res.e_zero), fmt_sig(res.e_min));

        if let Some(axes) = &a.surface {
            let f = error_function_for(g, &res, cfg.term_budget)?;
            let table = sample_error_surface(&f, axes).with_context(|| unit.label())?;
            let suffix = unit_suffix(unit, many);
            let csv_path = match &a.surface_out {
                Some(p) => with_suffix(p, &suffix),
                None => sibling(&c.input, &format!("{suffix}.surface.csv")),
            };
            std::fs::write(&csv_path, table.to_csv())
                .with_context(|| format!("cannot write {}", csv_path.display()))?;
            body["surface_csv"] = json!(csv_path.display().to_string());
            let _ = writeln!(text, "  surface: {}", csv_path.display());
            if let Some(svg_path) = &a.svg {
                let svg_path = with_suffix(svg_path, &suffix);
                write_svg(&svg_path, &table, g, &res)?;
                body["surface_svg"] = json!(svg_path.display().to_string());
                let _ = writeln!(text, "  plot: {}", svg_path.display());
            }
        }
        sections.push(unit.section(body));
    }

    let mut corrected_path = None;
    if any_correction {
        let path = a.corrected.clone().unwrap_or_else(|| sibling(&c.input, ".corrected.csv"));
        std::fs::write(&path, table_csv(&corrected_table))
            .with_context(|| format!("cannot write {}", path.display()))?;
        let _ = writeln!(text, "corrected baselines: {}", path.display());
        corrected_path = Some(path);
    }

    let verdict = worst(verdicts);
    let mut env = finish("correct", Some(verdict), sections, &warnings);
    env["corrected_csv"] = json!(corrected_path.map(|p| p.display().to_string()));
    match c.format {
        Format::Json => emit(&c.out, &json_text(&env))?,
        Format::Text => emit(&c.out, &format!("loopwatch correct: {}\n{text}", verdict_word(verdict)))?,
    }
    Ok(exit_code(verdict))
}

fn write_svg(path: &Path, table: &SurfaceTable, g: &WeightedDigraph, res: &CorrectionResult) -> Result<()> {
    let labels: Vec<String> = res.suspects.iter().map(|&i| arc_name(g, i)).collect();
    let doc = svg::render(table, &labels)?;
    std::fs::write(path, doc).with_context(|| format!("cannot write {}", path.display()))
}

/// Baseline table in its input layout.
fn table_csv(t: &BaselineTable) -> String {
    let mut out = String::from(if t.single_coordinate { "from,to,w\n" } else { "from,to,dx,dy,dz\n" });
    for row in &t.rows {
        let _ = write!(out, "{},{}", row.from, row.to);
        for d in &row.deltas {
            let _ = write!(out, ",{}", fmt_sig(*d));
        }
        out.push('\n');
    }
    out
}

pub fn oracle(a: &OracleArgs) -> Result<u8> {
    let suspects = a.suspects.as_deref().map(parse_suspects).transpose()?;
    if a.rmax == 0 {
        bail!("--rmax must be at least 1");
    }
    let budget = term_budget()?;
    let loaded = load(&a.input, a.coord)?;
    let mut sections = Vec::new();
    let mut all_pass = true;
    let mut text = String::new();
    for unit in &loaded.units {
        let g = &unit.graph;
        let chosen = match &suspects {
            Some(list) => locate_suspects(g, list)?.unwrap_or_default(),
            None => Vec::new(),
        };
        let mut m = build_poly_matrix(g, &chosen)?;
        if a.negative_control {
            let (u, v) = g.endpoints(0);
            m.set(u, v, ExpPoly::zero());
        }
        // validate the limits once before the expensive powers
        walk_oracle_with_suspects(g, &chosen, 0, 0, a.rmax).with_context(|| unit.label())?;
        let powers = symbolic_powers(&m, a.rmax, budget)?;
        let mut checked = 0usize;
        let mut failures = Vec::new();
        for (k, p) in powers.iter().enumerate() {
            let r = k + 1;
            for u in 0..g.order() {
                for v in 0..g.order() {
                    let expected = walk_oracle_with_suspects(g, &chosen, u, v, r)?;
                    checked += 1;
                    if p.get(u, v) != &expected {
                        failures.push(json!({
                            "r": r,
                            "from": g.vertices()[u],
                            "to": g.vertices()[v],
                            "symbolic": p.get(u, v).to_string(),
                            "oracle": expected.to_string(),
                        }));
                    }
                }
            }
        }
        let pass = failures.is_empty();
        all_pass &= pass;
        let _ = writeln!(
            text,
            "[{}] {}: {} of {checked} entries differ (r <= {})",
            unit.label(),
            if pass { "pass" } else { "FAIL" },
            failures.len(),
            a.rmax
        );
        for f in failures.iter().take(10) {
            let field = |k: &str| f[k].as_str().unwrap_or_default().to_string();
            let _ = writeln!(
                text,
                "  r={} {}->{}: symbolic {} vs oracle {}",
                f["r"],
                field("from"),
                field("to"),
                field("symbolic"),
                field("oracle")
            );
        }
        sections.push(unit.section(json!({
            "pass": pass,
            "r_max": a.rmax,
            "checked": checked,
            "suspects": chosen.iter().map(|&i| arc_name(g, i)).collect::<Vec<_>>(),
            "failures": failures,
        })));
    }
    let env = finish("oracle", None, sections, &loaded.warnings);
    match a.format {
        Format::Json => emit(&a.out, &json_text(&env))?,
        Format::Text => emit(
            &a.out,
            &format!("loopwatch oracle: {}\n{text}", if all_pass { "pass" } else { "FAIL" }),
        )?,
    }
    Ok(if all_pass { 0 } else { 3 })
}
