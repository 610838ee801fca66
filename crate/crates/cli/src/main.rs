//! Command-line front end: formula analysis and evaluation, structure
//! validation, restricted-quantifier macros, prenex normalization,
//! emboundment and its inverse, theory checking, the principal
//! ultraproduct, Banach-Mazur certification, and a built-in selftest.
//!
//! Exit codes: 0 on success or PASS, 1 when a checked property fails
//! (positive defect, failed validation, failed certification), 2 on usage
//! or parse errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gauge_logic::acceptance::{run_all, Scale};
use gauge_logic::analysis;
use gauge_logic::banach_mazur::{
    build_perturbation, certify_delta, eps_iso_check, op_norm, parse_vectors, vec_norm,
    LinearMap, NormedSpace,
};
use gauge_logic::corpus::Rng;
use gauge_logic::embound;
use gauge_logic::rational::{parse_rat, rat_str, Rat};
use gauge_logic::structure::{
    build_down, build_up, eval_formula, inf_window, prenex, principal_ultraproduct, sup_window,
    validate, Assignment, GaugedStructure,
};
use gauge_logic::syntax::{free_vars, parse_formula, Formula, Signature};
use gauge_logic::theories::{check_theory, load_theory, CheckParams};

#[derive(Parser)]
#[command(
    name = "gauge-logic",
    version,
    about = "Unbounded continuous logic over gauged metric spaces",
    after_help = "Size caps: measure algebras allow 4 atom weights and normed samples 125 \
                  lattice points by default; set GAUGE_LOGIC_CAP=N to allow N weights and \
                  N^3 points."
)]
struct Cli {
    /// Output style: readable text, or one s-expression record per result
    /// with exact rationals as p/q strings.
    #[arg(long, global = true, value_enum, default_value_t = Format::Human)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Records,
}

#[derive(Args)]
struct FormulaInput {
    /// File containing one formula s-expression.
    #[arg(long, conflicts_with = "text")]
    formula: Option<PathBuf>,
    /// Formula s-expression given inline.
    #[arg(long)]
    text: Option<String>,
    /// Optional signature file; defaults to the distinguished symbols only.
    #[arg(long)]
    sig: Option<PathBuf>,
}

impl FormulaInput {
    fn source(&self) -> Result<String> {
        match (&self.formula, &self.text) {
            (Some(path), None) => read(path),
            (None, Some(text)) => Ok(text.clone()),
            _ => bail!("provide exactly one of --formula FILE or --text SEXP"),
        }
    }

    fn load(&self) -> Result<(Formula, Signature)> {
        let sig = match &self.sig {
            Some(path) => Signature::parse(&read(path)?)?,
            None => Signature::new(),
        };
        let formula = parse_formula(self.source()?.trim(), &sig)?;
        Ok((formula, sig))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Static analysis: boundedness, bound, eventual constancy,
    /// thresholds, and the synthesized continuity modulus.
    Analyze {
        #[command(flatten)]
        input: FormulaInput,
    },
    /// Exact evaluation of a formula on a structure.
    Eval {
        structure: PathBuf,
        #[command(flatten)]
        input: FormulaInput,
        /// Assignment of free variables, e.g. x=a,y=b.
        #[arg(long, default_value = "")]
        assign: String,
    },
    /// Check every structure invariant, reporting each failure.
    Validate { structure: PathBuf },
    /// Prenex normal form.
    Prenex {
        #[command(flatten)]
        input: FormulaInput,
    },
    /// Restricted-quantifier macros over a gauge window.
    ExpandMacro {
        #[command(flatten)]
        input: FormulaInput,
        #[arg(long, value_enum)]
        kind: MacroKind,
        #[arg(long)]
        var: String,
        #[arg(long)]
        r: String,
        #[arg(long)]
        rp: String,
    },
    /// Emboundment: write the bounded structure with the added infinity
    /// point.
    Embound { input: PathBuf, output: PathBuf },
    /// Inverse of emboundment.
    Recover {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        infinity: String,
    },
    /// Metric comparison checks between a structure and its emboundment.
    CheckEmbound { input: PathBuf },
    /// Exact defects of a theory's conditions and scheme instances.
    CheckTheory {
        structure: PathBuf,
        theory: PathBuf,
        /// Epsilon values for approximate schemes, comma separated.
        #[arg(long, default_value = "1/2,1/4")]
        eps: String,
        /// n values for plain-universal and n-parameterized schemes.
        #[arg(long, default_value = "1,2")]
        ns: String,
    },
    /// Ultraproduct along the principal ultrafilter at the given index.
    UltraproductPrincipal {
        factors: Vec<PathBuf>,
        #[arg(long)]
        index: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Optional file of formulas whose values must match the factor.
        #[arg(long)]
        check_formulas: Option<PathBuf>,
    },
    /// Certified Banach-Mazur perturbation radius for a basis.
    BmCertify {
        /// Normed space, e.g. l1:3 or linf:2.
        #[arg(long)]
        space: String,
        /// File of (vec q ...) basis vectors.
        #[arg(long)]
        basis: PathBuf,
        #[arg(long)]
        eps: String,
        /// Randomized certification trials.
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// epsilon-isomorphism check of a matrix.
    BmCheck {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        space: String,
        #[arg(long)]
        eps: String,
    },
    /// Run the embedded acceptance corpus at reduced scale.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum MacroKind {
    Sup,
    Inf,
    Down,
    Up,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn record(fields: &[(&str, String)]) -> String {
    let mut out = String::from("(record");
    for (k, v) in fields {
        out.push_str(&format!(" ({k} {v})"));
    }
    out.push(')');
    out
}

fn parse_assignment(text: &str, m: &GaugedStructure) -> Result<Assignment> {
    let mut asg = Assignment::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let (var, point) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("assignment entries look like x=a, got {part:?}"))?;
        let idx = m
            .point_index(point.trim())
            .ok_or_else(|| anyhow!("unknown point {point:?}"))?;
        asg.insert(var.trim().to_string(), idx);
    }
    Ok(asg)
}

fn parse_rat_list(text: &str) -> Result<Vec<Rat>> {
    text.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| parse_rat(p).map_err(|e| anyhow!(e)))
        .collect()
}

fn run(cli: Cli) -> Result<bool> {
    let records = cli.format == Format::Records;
    match cli.command {
        Command::Analyze { input } => {
            let (formula, sig) = input.load()?;
            let (well, diags) = analysis::well_formed(&formula);
            if !well {
                for d in diags {
                    eprintln!("ill-formed: {d}");
                }
                bail!("formula is not well-formed");
            }
            let a = analysis::classify(&formula)?;
            let modulus = analysis::synthesize_modulus(&sig, &formula)?;
            if records {
                let mut fields = vec![
                    ("op", "analyze".to_string()),
                    ("bounded", a.bounded.to_string()),
                ];
                if let Some(b) = &a.bound {
                    fields.push(("bound", rat_str(b)));
                }
                for v in &a.free {
                    fields.push(("ec", format!("({v} {})", a.is_ec(v))));
                    if let Some(c) = a.threshold(v) {
                        fields.push(("threshold", format!("({v} {})", rat_str(&c))));
                    }
                }
                fields.push(("modulus", modulus.to_sexp().to_string()));
                println!("{}", record(&fields));
            } else {
                println!("bounded: {}", a.bounded);
                if let Some(b) = &a.bound {
                    println!("bound: {}", rat_str(b));
                }
                if a.free.is_empty() {
                    println!("free variables: none");
                }
                for v in &a.free {
                    match a.threshold(v) {
                        Some(c) => println!(
                            "variable {v}: eventually constant, threshold {}",
                            rat_str(&c)
                        ),
                        None => println!("variable {v}: not eventually constant"),
                    }
                }
                println!("modulus: {modulus}");
            }
            Ok(true)
        }
        Command::Eval { structure, input, assign } => {
            let m = GaugedStructure::parse(&read(&structure)?, None)?;
            let formula = if input.sig.is_some() {
                input.load()?.0
            } else {
                // default to the structure's own signature
                parse_formula(input.source()?.trim(), &m.signature)?
            };
            let asg = parse_assignment(&assign, &m)?;
            let missing: Vec<String> = free_vars(&formula)
                .into_iter()
                .filter(|v| !asg.contains_key(v))
                .collect();
            if !missing.is_empty() {
                bail!("unassigned free variables: {missing:?}");
            }
            let value = eval_formula(&m, &formula, &asg)?;
            if records {
                println!("{}", record(&[("op", "eval".into()), ("value", rat_str(&value))]));
            } else {
                println!("{}", rat_str(&value));
            }
            Ok(true)
        }
        Command::Validate { structure } => {
            let m = GaugedStructure::parse(&read(&structure)?, None)?;
            let report = validate(&m);
            if records {
                println!(
                    "{}",
                    record(&[
                        ("op", "validate".into()),
                        ("pass", report.pass().to_string()),
                        ("failures", report.failures.len().to_string()),
                    ])
                );
            } else if report.pass() {
                println!("PASS");
            } else {
                for f in &report.failures {
                    println!("FAIL: {f}");
                }
            }
            Ok(report.pass())
        }
        Command::Prenex { input } => {
            let (formula, _) = input.load()?;
            let p = prenex(&formula);
            if records {
                println!(
                    "{}",
                    record(&[("op", "prenex".into()), ("formula", p.to_sexp().to_string())])
                );
            } else {
                println!("{p}");
            }
            Ok(true)
        }
        Command::ExpandMacro { input, kind, var, r, rp } => {
            let (formula, _) = input.load()?;
            let r = parse_rat(&r).map_err(|e| anyhow!(e))?;
            let rp = parse_rat(&rp).map_err(|e| anyhow!(e))?;
            let out = match kind {
                MacroKind::Sup => sup_window(&formula, &var, &r, &rp)?,
                MacroKind::Inf => inf_window(&formula, &var, &r, &rp)?,
                MacroKind::Down => build_down(&formula, &var, &r, &rp)?,
                MacroKind::Up => build_up(&formula, &var, &r, &rp)?,
            };
            if records {
                println!(
                    "{}",
                    record(&[
                        ("op", "expand-macro".into()),
                        ("formula", out.to_sexp().to_string()),
                    ])
                );
            } else {
                println!("{out}");
            }
            Ok(true)
        }
        Command::Embound { input, output } => {
            let m = GaugedStructure::parse(&read(&input)?, None)?;
            let e = embound::embound(&m)?;
            std::fs::write(&output, e.structure.to_file_text())
                .with_context(|| format!("writing {}", output.display()))?;
            if records {
                println!(
                    "{}",
                    record(&[
                        ("op", "embound".into()),
                        ("infinity", e.infinity_name().to_string()),
                        ("points", e.structure.len().to_string()),
                    ])
                );
            } else {
                println!(
                    "embounded {} points, infinity point {:?}",
                    e.structure.len(),
                    e.infinity_name()
                );
            }
            Ok(true)
        }
        Command::Recover { input, output, infinity } => {
            let n = GaugedStructure::parse(&read(&input)?, None)?;
            let m = embound::recover(&n, &infinity, None)?;
            std::fs::write(&output, m.to_file_text())
                .with_context(|| format!("writing {}", output.display()))?;
            if records {
                println!("{}", record(&[("op", "recover".into()), ("points", m.len().to_string())]));
            } else {
                println!("recovered {} points", m.len());
            }
            Ok(true)
        }
        Command::CheckEmbound { input } => {
            let m = GaugedStructure::parse(&read(&input)?, None)?;
            let report = embound::check_comparison(&m)?;
            let e = embound::embound(&m)?;
            let metric_ok = embound::validate_embounded(&e).pass();
            let pass = report.pass() && metric_ok;
            if records {
                println!(
                    "{}",
                    record(&[
                        ("op", "check-embound".into()),
                        ("pass", pass.to_string()),
                        ("metric", metric_ok.to_string()),
                    ])
                );
            } else if pass {
                println!("PASS");
            } else {
                for (a, b) in &report.metric_failures {
                    println!("FAIL: d({a},{b}) below the embounded distance");
                }
                for (p, r, rp) in &report.ball_failures {
                    println!("FAIL: neighborhood of the {r}-ball leaks {p} past {rp}");
                }
                if !metric_ok {
                    println!("FAIL: embounded metric invalid");
                }
            }
            Ok(pass)
        }
        Command::CheckTheory { structure, theory, eps, ns } => {
            let m = GaugedStructure::parse(&read(&structure)?, None)?;
            let t = load_theory(&read(&theory)?, &m.signature)?;
            let params = CheckParams {
                ns: ns
                    .split(',')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| p.trim().parse::<u64>().map_err(|e| anyhow!("bad n: {e}")))
                    .collect::<Result<Vec<_>>>()?,
                eps: parse_rat_list(&eps)?,
            };
            let report = check_theory(&m, &t, &m.signature, &params)?;
            for row in &report.rows {
                let instance = match (&row.n, &row.eps) {
                    (Some(n), Some(e)) => format!("n={n} eps={}", rat_str(e)),
                    (Some(n), None) => format!("n={n}"),
                    (None, Some(e)) => format!("eps={}", rat_str(e)),
                    (None, None) => String::new(),
                };
                if records {
                    println!(
                        "{}",
                        record(&[
                            ("op", "check-theory".into()),
                            ("label", row.label.clone()),
                            ("instance", instance.clone()),
                            ("defect", rat_str(&row.defect)),
                        ])
                    );
                } else if instance.is_empty() {
                    println!("{}: defect {}", row.label, rat_str(&row.defect));
                } else {
                    println!("{} {}: defect {}", row.label, instance, rat_str(&row.defect));
                }
            }
            for s in &report.skipped {
                eprintln!("skipped: {s}");
            }
            if !records {
                println!("{}", if report.pass() { "PASS" } else { "FAIL" });
            }
            Ok(report.pass())
        }
        Command::UltraproductPrincipal { factors, index, out, check_formulas } => {
            let structures = factors
                .iter()
                .map(|p| Ok(GaugedStructure::parse(&read(p)?, None)?))
                .collect::<Result<Vec<_>>>()?;
            let product = principal_ultraproduct(&structures, index)?;
            if let Some(path) = out {
                std::fs::write(&path, product.to_file_text())
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            let mut all_equal = true;
            let mut checked = 0usize;
            if let Some(path) = check_formulas {
                let text = read(&path)?;
                for form in gauge_logic::sexp::parse_many(&text)? {
                    let f = parse_formula(&form.to_string(), &product.signature)?;
                    let fv = free_vars(&f);
                    for asg in gauge_logic::structure::all_assignments(&product, &fv) {
                        let lhs = eval_formula(&product, &f, &asg)?;
                        let rhs = eval_formula(&structures[index], &f, &asg)?;
                        checked += 1;
                        if lhs != rhs {
                            all_equal = false;
                        }
                    }
                }
            }
            if records {
                println!(
                    "{}",
                    record(&[
                        ("op", "ultraproduct-principal".into()),
                        ("points", product.len().to_string()),
                        ("checked", checked.to_string()),
                        ("pass", all_equal.to_string()),
                    ])
                );
            } else {
                println!(
                    "principal ultraproduct at index {index}: {} points; {checked} formula values checked",
                    product.len()
                );
                if !all_equal {
                    println!("FAIL: some formula value differs from the factor");
                }
            }
            Ok(all_equal)
        }
        Command::BmCertify { space, basis, eps, trials } => {
            let space = NormedSpace::parse(&space)?;
            let vectors = parse_vectors(&read(&basis)?)?;
            let eps = parse_rat(&eps).map_err(|e| anyhow!(e))?;
            let cert = certify_delta(&vectors, &eps, &space)?;
            // randomized certification: perturb within delta and re-check
            let mut rng = Rng::new(0xCE47);
            let mut failures = 0usize;
            for _ in 0..trials {
                let mut targets = Vec::with_capacity(vectors.len());
                for b in &vectors {
                    let dir: Vec<Rat> =
                        (0..space.dim).map(|_| rng.ratio_in(-4, 4, 4)).collect();
                    let norm = vec_norm(&dir, space.kind);
                    let t = rng.ratio_in(0, 4, 4);
                    let target: Vec<Rat> = if norm == Rat::from_integer(0.into()) {
                        b.clone()
                    } else {
                        b.iter()
                            .zip(&dir)
                            .map(|(x, d)| x + d * &cert.delta * &t / &norm)
                            .collect()
                    };
                    targets.push(target);
                }
                let p = build_perturbation(&vectors, &targets, &space)?;
                if !eps_iso_check(&p.t, &eps, &space)?.pass {
                    failures += 1;
                }
            }
            if records {
                println!(
                    "{}",
                    record(&[
                        ("op", "bm-certify".into()),
                        ("delta", rat_str(&cert.delta)),
                        ("min-norm", rat_str(&cert.min_norm)),
                        ("trials", trials.to_string()),
                        ("failures", failures.to_string()),
                    ])
                );
            } else {
                println!("min norm s over the coefficient sphere: {}", rat_str(&cert.min_norm));
                println!("certified delta = s*eps/(2n): {}", rat_str(&cert.delta));
                println!("randomized trials: {trials}, failures: {failures}");
            }
            Ok(failures == 0)
        }
        Command::BmCheck { matrix, space, eps } => {
            let space = NormedSpace::parse(&space)?;
            let m = LinearMap::parse(&read(&matrix)?)?;
            let eps = parse_rat(&eps).map_err(|e| anyhow!(e))?;
            let check = eps_iso_check(&m, &eps, &space)?;
            let norm = op_norm(&m, &space);
            if records {
                println!(
                    "{}",
                    record(&[
                        ("op", "bm-check".into()),
                        ("pass", check.pass.to_string()),
                        ("op-norm", rat_str(&norm)),
                        ("forward-margin", rat_str(&check.forward_margin)),
                        ("inverse-margin", rat_str(&check.inverse_margin)),
                        ("bound", rat_str(&check.bound)),
                        ("tolerance", rat_str(&check.tolerance)),
                    ])
                );
            } else {
                println!("operator norm: {}", rat_str(&norm));
                println!("bound (rational stand-in for e^eps): {}", rat_str(&check.bound));
                println!("forward margin: {}", rat_str(&check.forward_margin));
                println!("inverse margin: {}", rat_str(&check.inverse_margin));
                println!("{}", if check.pass { "PASS" } else { "FAIL" });
            }
            Ok(check.pass)
        }
        Command::Selftest => {
            let results = run_all(&Scale::selftest());
            let mut pass = true;
            for r in &results {
                if records {
                    println!(
                        "{}",
                        record(&[
                            ("op", "selftest".into()),
                            ("criterion", r.name.to_string()),
                            ("pass", r.pass.to_string()),
                        ])
                    );
                } else {
                    println!(
                        "[{}] {} — {}",
                        if r.pass { "PASS" } else { "FAIL" },
                        r.name,
                        r.detail
                    );
                }
                pass &= r.pass;
            }
            Ok(pass)
        }
    }
}

fn main() -> ExitCode {
    // die quietly instead of panicking when the consumer closes the pipe,
    // e.g. `gauge-logic check-theory ... | head`
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
