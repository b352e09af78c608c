use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use tollcap::analysis::{bounds_table, efficiency_at_optimal_cap};
use tollcap::capalg::sweep_header;
use tollcap::presets::{self, PresetParams};
use tollcap::pricing::{best_response, best_response_table, EquilibriumReport, EquilibriumStatus};
use tollcap::table::{fmt_num, num_row, write_csv};
use tollcap::{
    build_cap_curve, duopoly_search, optimal_cap, optimal_flow, solve_wardrop, spne, sweep,
    total_cost, validate, verify_spne, Cap, Error, Instance,
};

mod exit {
    pub const FAILURE: u8 = 1;
    pub const INVALID: u8 = 2;
    pub const NOT_APPLICABLE: u8 = 3;
    pub const NONE_FOUND: u8 = 4;
}

#[derive(Parser)]
#[command(
    name = "tollcap",
    version,
    about = "Toll competition and uniform price caps on parallel-link networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Named example: fig-alg, fig-bad, fig-mul, fig-non, fig-aff, fig-poly
    #[arg(
        long,
        required_unless_present = "instance",
        conflicts_with = "instance"
    )]
    preset: Option<String>,
    /// Instance JSON file
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Slope of link 2 for fig-bad (default 2) and fig-non
    #[arg(long)]
    a2: Option<f64>,
    /// Slope of link 3 for fig-mul (default 0.5)
    #[arg(long)]
    a3: Option<f64>,
    /// Number of links for fig-aff (default 2)
    #[arg(long)]
    n: Option<usize>,
    /// Degree for fig-poly (default 3)
    #[arg(long)]
    d: Option<u32>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct Output {
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write to this file instead of standard output
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct Search {
    #[arg(long, default_value_t = 2000)]
    grid_n: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
}

#[derive(Subcommand)]
enum Command {
    /// User equilibrium for given tolls
    Wardrop {
        #[command(flatten)]
        source: Source,
        /// Comma-separated tolls (default all zero)
        #[arg(long, value_delimiter = ',')]
        tolls: Option<Vec<f64>>,
        #[command(flatten)]
        out: Output,
    },
    /// System-optimal flow
    OptimalFlow {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        out: Output,
    },
    /// Equilibrium tolls under a cap
    Spne {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value = "inf")]
        cap: Cap,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        out: Output,
    },
    /// One firm's best response, or a tabulation against the rival's toll
    BestResponse {
        #[command(flatten)]
        source: Source,
        /// Firm index (0-based)
        #[arg(long)]
        firm: usize,
        /// Comma-separated tolls; the firm's own entry is ignored
        #[arg(long, value_delimiter = ',')]
        tolls: Option<Vec<f64>>,
        #[arg(long, default_value = "inf")]
        cap: Cap,
        #[arg(long, default_value_t = 2000)]
        grid_n: usize,
        /// Tabulate against rival tolls in [0, t-max] (duopolies)
        #[arg(long)]
        table: bool,
        #[arg(long)]
        t_max: Option<f64>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Breakpoint curve and optimal uniform cap
    OptimalCap {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        out: Output,
    },
    /// Equilibrium tolls, flows and cost on a grid of caps
    Sweep {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0.0)]
        c_lo: f64,
        /// Default: 1.2 times the first breakpoint
        #[arg(long)]
        c_hi: Option<f64>,
        #[arg(long, default_value_t = 101)]
        steps: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Grid search for capped duopoly equilibria
    DuopolySearch {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        cap: Cap,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        out: Output,
    },
    /// Check a toll vector for profitable unilateral deviations
    Verify {
        #[command(flatten)]
        source: Source,
        /// JSON document with "tolls" (or "equilibria") and "cap" (or "c_star")
        #[arg(long, required_unless_present = "tolls")]
        result: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', conflicts_with = "result")]
        tolls: Option<Vec<f64>>,
        #[arg(long)]
        cap: Option<Cap>,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        out: Output,
    },
    /// Worst-case efficiency bounds by latency degree
    Bounds {
        #[arg(long, default_value_t = 10)]
        d_max: u32,
        #[command(flatten)]
        out: Output,
    },
    /// Validation, equilibria, optimal cap and efficiency in one document
    Report {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        out: Output,
    },
}

/// A finished run: what to print and which exit code to return.
struct Done {
    code: u8,
    json: Value,
    csv: Option<(Vec<String>, Vec<Vec<String>>)>,
}

impl Done {
    fn ok(v: impl Serialize) -> Self {
        Done {
            code: 0,
            json: serde_json::to_value(v).expect("serializable result"),
            csv: None,
        }
    }

    fn with_csv(mut self, header: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        self.csv = Some((header, rows));
        self
    }

    fn code(mut self, code: u8) -> Self {
        self.code = code;
        self
    }
}

/// Errors that end the run early.
enum Fail {
    Usage(String),
    Core(Error, Option<Instance>),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e, None)
    }
}

impl From<io::Error> for Fail {
    fn from(e: io::Error) -> Self {
        Fail::Usage(e.to_string())
    }
}

fn load(src: &Source) -> Result<Instance, Fail> {
    match (&src.preset, &src.instance) {
        (Some(name), None) => {
            let p = PresetParams {
                a2: src.a2,
                a3: src.a3,
                n: src.n,
                d: src.d,
            };
            presets::by_name(name, p).map_err(Fail::from)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Fail::Usage(format!("cannot read {}: {e}", path.display())))?;
            Instance::from_json(&text).map_err(Fail::from)
        }
        _ => Err(Fail::Usage(
            "give exactly one of --preset or --instance".into(),
        )),
    }
}

/// Attaches the instance so a not-applicable failure can report its validation.
fn with_inst<T>(r: tollcap::Result<T>, inst: &Instance) -> Result<T, Fail> {
    r.map_err(|e| Fail::Core(e, Some(inst.clone())))
}

fn status_code(r: &EquilibriumReport) -> u8 {
    match r.status {
        EquilibriumStatus::NoneFound => exit::NONE_FOUND,
        EquilibriumStatus::NotApplicable => exit::NOT_APPLICABLE,
        _ => 0,
    }
}

fn tolls_or_zero(t: &Option<Vec<f64>>, n: usize) -> Vec<f64> {
    t.clone().unwrap_or_else(|| vec![0.0; n])
}

fn read_result(path: &Path) -> Result<(Vec<f64>, Option<Cap>), Fail> {
    let text = fs::read_to_string(path)
        .map_err(|e| Fail::Usage(format!("cannot read {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| Fail::Core(Error::Parse(format!("{}: {e}", path.display())), None))?;
    let tolls = doc
        .get("tolls")
        .or_else(|| doc.pointer("/equilibria/0/tolls"))
        .ok_or_else(|| Fail::Core(Error::Parse("result has no tolls".into()), None))?;
    let tolls: Vec<f64> = serde_json::from_value(tolls.clone())
        .map_err(|e| Fail::Core(Error::Parse(format!("tolls: {e}")), None))?;
    let cap = match doc.get("cap").or_else(|| doc.get("c_star")) {
        Some(v) => Some(
            serde_json::from_value::<Cap>(v.clone())
                .map_err(|e| Fail::Core(Error::Parse(format!("cap: {e}")), None))?,
        ),
        None => None,
    };
    Ok((tolls, cap))
}

fn run(cmd: &Command) -> Result<Done, Fail> {
    match cmd {
        Command::Wardrop { source, tolls, .. } => {
            let inst = load(source)?;
            let t = tolls_or_zero(tolls, inst.n());
            let sol = solve_wardrop(&inst, &t)?;
            let cost = total_cost(&inst, &sol.flow.x)?;
            let mut header = vec![
                "link".to_string(),
                "toll".into(),
                "x".into(),
                "latency".into(),
            ];
            header.push("effective_cost".into());
            let rows = (0..inst.n())
                .map(|i| {
                    let x = sol.flow.x[i];
                    let l = inst.link(i).value(x);
                    vec![
                        i.to_string(),
                        fmt_num(t[i]),
                        fmt_num(x),
                        fmt_num(l),
                        fmt_num(l + t[i]),
                    ]
                })
                .collect();
            Ok(Done::ok(json!({
                "tolls": t,
                "x": sol.flow.x,
                "level": sol.level,
                "support": sol.support,
                "cost": cost,
            }))
            .with_csv(header, rows))
        }
        Command::OptimalFlow { source, .. } => {
            let inst = load(source)?;
            let sol = optimal_flow(&inst)?;
            let cost = total_cost(&inst, &sol.flow.x)?;
            Ok(Done::ok(json!({
                "x": sol.flow.x,
                "marginal_cost": sol.level,
                "support": sol.support,
                "cost": cost,
            })))
        }
        Command::Spne {
            source,
            cap,
            search,
            ..
        } => {
            let inst = load(source)?;
            let r = with_inst(spne(&inst, *cap, search.grid_n, search.eps), &inst)?;
            let code = status_code(&r);
            Ok(Done::ok(&r).code(code))
        }
        Command::BestResponse {
            source,
            firm,
            tolls,
            cap,
            grid_n,
            table,
            t_max,
            steps,
            ..
        } => {
            let inst = load(source)?;
            if *table {
                let t_max = match (t_max, cap.is_finite()) {
                    (Some(t), _) => *t,
                    (None, true) => cap.value(),
                    (None, false) => {
                        return Err(Fail::Usage(
                            "--table needs --t-max or a finite --cap".into(),
                        ))
                    }
                };
                let rows = with_inst(
                    best_response_table(&inst, *firm, *cap, t_max, *steps),
                    &inst,
                )?;
                let header = ["t_opponent", "br_lo", "br_hi", "profit"]
                    .map(String::from)
                    .to_vec();
                let csv = rows
                    .iter()
                    .map(|r| num_row(&[r.t_opponent, r.br_lo, r.br_hi, r.profit]))
                    .collect();
                Ok(Done::ok(&rows).with_csv(header, csv))
            } else {
                let t = tolls_or_zero(tolls, inst.n());
                let br = best_response(&inst, &t, *firm, *cap, *grid_n)?;
                Ok(Done::ok(json!({
                    "firm": firm,
                    "cap": cap,
                    "argmax": br.argmax,
                    "value": br.value,
                    "flat": br.flat,
                    "pieces": br.pieces,
                })))
            }
        }
        Command::OptimalCap { source, .. } => {
            let inst = load(source)?;
            let r = with_inst(optimal_cap(&inst), &inst)?;
            let mut v = serde_json::to_value(&r).expect("serializable");
            v["breakpoints"] = json!(r.curve.breakpoints);
            v["cap"] = json!(Cap::new(r.c_star)?);
            Ok(Done::ok(v))
        }
        Command::Sweep {
            source,
            c_lo,
            c_hi,
            steps,
            ..
        } => {
            let inst = load(source)?;
            let hi = match c_hi {
                Some(c) => *c,
                None => {
                    1.2 * with_inst(build_cap_curve(&inst), &inst)?
                        .breakpoints
                        .first()
                        .copied()
                        .unwrap_or(1.0)
                }
            };
            let rows = with_inst(sweep(&inst, *c_lo, hi, *steps), &inst)?;
            let csv = rows
                .iter()
                .map(|r| {
                    let mut v = vec![r.c, r.level, r.cost];
                    v.extend(&r.t);
                    v.extend(&r.x);
                    num_row(&v)
                })
                .collect();
            Ok(Done::ok(&rows).with_csv(sweep_header(inst.n()), csv))
        }
        Command::DuopolySearch {
            source,
            cap,
            search,
            ..
        } => {
            let inst = load(source)?;
            let r = with_inst(
                duopoly_search(&inst, *cap, search.grid_n, search.eps),
                &inst,
            )?;
            let code = status_code(&r);
            Ok(Done::ok(&r).code(code))
        }
        Command::Verify {
            source,
            result,
            tolls,
            cap,
            search,
            ..
        } => {
            let inst = load(source)?;
            let (t, doc_cap) = match (result, tolls) {
                (Some(path), _) => read_result(path)?,
                (None, Some(t)) => (t.clone(), None),
                (None, None) => return Err(Fail::Usage("give --result or --tolls".into())),
            };
            let c = cap.or(doc_cap).unwrap_or(Cap::INF);
            let v = verify_spne(&inst, c, &t, search.eps, search.grid_n)?;
            let code = if v.passed { 0 } else { exit::NONE_FOUND };
            Ok(Done::ok(&v).code(code))
        }
        Command::Bounds { d_max, .. } => {
            if *d_max < 1 {
                return Err(Fail::Usage("--d-max must be at least 1".into()));
            }
            let rows = bounds_table(*d_max);
            let header = ["d", "upper_bound", "lower_bound_nonexistence"]
                .map(String::from)
                .to_vec();
            let csv = rows
                .iter()
                .map(|r| {
                    vec![
                        r.d.to_string(),
                        fmt_num(r.upper_bound),
                        r.lower_bound_nonexistence.map(fmt_num).unwrap_or_default(),
                    ]
                })
                .collect();
            Ok(Done::ok(&rows).with_csv(header, csv))
        }
        Command::Report { source, .. } => {
            let inst = load(source)?;
            Ok(Done::ok(report(&inst)?))
        }
    }
}

fn report(inst: &Instance) -> Result<Value, Fail> {
    let v = validate(inst)?;
    let w = solve_wardrop(inst, &vec![0.0; inst.n()])?;
    let opt = optimal_flow(inst)?;
    let or_reason = |r: tollcap::Result<Value>| match r {
        Ok(v) => v,
        Err(e) => json!({ "not_applicable": e.to_string() }),
    };
    let spne = or_reason(
        spne(inst, Cap::INF, 2000, 1e-6).map(|r| serde_json::to_value(r).expect("serializable")),
    );
    let cap = or_reason(optimal_cap(inst).map(|r| {
        json!({
            "c_star": r.c_star,
            "cost_at_star": r.cost_at_star,
            "tolls": r.tolls,
            "flow": r.flow,
            "breakpoints": r.curve.breakpoints,
        })
    }));
    let eff = or_reason(
        efficiency_at_optimal_cap(inst).map(|r| serde_json::to_value(r).expect("serializable")),
    );
    Ok(json!({
        "instance": inst,
        "validation": v,
        "wardrop": { "x": w.flow.x, "level": w.level, "cost": total_cost(inst, &w.flow.x)? },
        "optimal_flow": { "x": opt.flow.x, "cost": total_cost(inst, &opt.flow.x)? },
        "spne_uncapped": spne,
        "optimal_cap": cap,
        "efficiency": eff,
    }))
}

fn output_of(cmd: &Command) -> &Output {
    match cmd {
        Command::Wardrop { out, .. }
        | Command::OptimalFlow { out, .. }
        | Command::Spne { out, .. }
        | Command::BestResponse { out, .. }
        | Command::OptimalCap { out, .. }
        | Command::Sweep { out, .. }
        | Command::DuopolySearch { out, .. }
        | Command::Verify { out, .. }
        | Command::Bounds { out, .. }
        | Command::Report { out, .. } => out,
    }
}

fn default_format(cmd: &Command) -> Format {
    match cmd {
        Command::Sweep { .. } => Format::Csv,
        Command::BestResponse { table: true, .. } => Format::Csv,
        _ => Format::Json,
    }
}

fn emit(done: &Done, fmt: Format, path: Option<&Path>) -> Result<(), Fail> {
    let mut buf = Vec::new();
    match (fmt, &done.csv) {
        (Format::Json, _) => {
            serde_json::to_writer_pretty(&mut buf, &done.json).expect("json output");
            buf.push(b'\n');
        }
        (Format::Csv, Some((header, rows))) => write_csv(&mut buf, header, rows)?,
        (Format::Csv, None) => {
            return Err(Fail::Usage(
                "this command has no CSV output, use --format json".into(),
            ))
        }
    }
    match path {
        Some(p) => {
            fs::write(p, buf).map_err(|e| Fail::Usage(format!("cannot write {}: {e}", p.display())))
        }
        None => io::stdout().write_all(&buf).map_err(Fail::from),
    }
}

fn print_failure(f: Fail) -> u8 {
    let (code, body) = match f {
        Fail::Usage(msg) => (exit::FAILURE, json!({ "error": msg })),
        Fail::Core(e, inst) => match &e {
            Error::Structural { reason, links } => (
                exit::INVALID,
                json!({ "error": "invalid instance", "reason": reason, "links": links }),
            ),
            Error::NotApplicable(msg) => {
                let validation = inst.as_ref().and_then(|i| validate(i).ok());
                (
                    exit::NOT_APPLICABLE,
                    json!({ "status": "not_applicable", "error": msg, "validation": validation }),
                )
            }
            _ => (exit::FAILURE, json!({ "error": e.to_string() })),
        },
    };
    eprintln!("{}", serde_json::to_string_pretty(&body).expect("json"));
    code
}

fn configure_threads() {
    if let Some(n) = std::env::var("TOLLCAP_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::FAILURE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    configure_threads();
    let out = output_of(&cli.command);
    let fmt = out.format.unwrap_or_else(|| default_format(&cli.command));
    match run(&cli.command)
        .and_then(|done| emit(&done, fmt, out.output.as_deref()).map(|_| done.code))
    {
        Ok(code) => ExitCode::from(code),
        Err(f) => ExitCode::from(print_failure(f)),
    }
}
