//! Command-line front end: load scenarios and models, run the decisions, and
//! emit verdicts with witnesses.
//!
//! Exit status 0 reports a clean verdict, 2 a property violation (a
//! no-signalling failure, a signalling input to a contextuality check, or an
//! impossible construction), and 1 an input error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use contextua::error::Error;
use contextua::format;
use contextua::logic::{
    self, delta_hardy, delta_pr, delta_pr_prefixed, det_sentence, theorem52_check,
    ContextualityMode, Evaluator, Formula, Sequent,
};
use contextua::presheaf::StochasticModel;
use contextua::scenario::{
    build_hv_model, build_weak_hv_model, canonical_hardy_supports, canonical_hardy_table,
    canonical_pr_box, check_no_signalling, context_label, emit_table, empirical_to_model,
    find_global_section, global_support_assignment, product_demo_box, Assignment, EmpiricalModel,
    ScenarioSemiring, SectionCertificate, SectionOutcome,
};
use contextua::semiring::{Boolean, NonNegRational, Semiring, SignedRational};

#[derive(Parser)]
#[command(name = "contextua", about = "Contextuality analysis of empirical models over label trees", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemiringChoice {
    Bool,
    #[value(name = "nonneg-rational")]
    NonNegRational,
    Rational,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Human,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoName {
    Pr,
    Hardy,
    Product,
}

#[derive(clap::Args)]
struct ModelArgs {
    /// Empirical model file (measurements, contexts, tables).
    #[arg(long)]
    model: String,
    /// Optional scenario file to cross-check the model against.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long, value_enum, default_value = "nonneg-rational")]
    semiring: SemiringChoice,
    #[arg(long, value_enum, default_value = "human")]
    format: OutputFormat,
}

#[derive(Subcommand)]
enum Command {
    /// Decide no-signalling of an empirical model.
    CheckNosig(ModelArgs),
    /// Decide contextuality (no global section exists).
    CheckContextual(ModelArgs),
    /// Decide strong contextuality (no support-consistent global assignment).
    CheckStrong(ModelArgs),
    /// Find a global section or an infeasibility certificate.
    GlobalSection(ModelArgs),
    /// Build the deterministic hidden-variable model from a global section.
    BuildHv {
        #[command(flatten)]
        args: ModelArgs,
        /// Write the constructed model here instead of stdout.
        #[arg(long)]
        output: Option<String>,
    },
    /// Build the two-latent-point model from a support witness.
    BuildWeakHv {
        #[command(flatten)]
        args: ModelArgs,
        #[arg(long)]
        output: Option<String>,
    },
    /// Evaluate a formula on a stochastic model file.
    ModelCheck {
        /// Stochastic model file (trees, projections, fibers, edges, valuation).
        #[arg(long)]
        model: String,
        #[arg(long)]
        formula: String,
        /// State to report, as node/state; defaults to the root state.
        #[arg(long)]
        state: Option<String>,
        #[arg(long, value_enum, default_value = "nonneg-rational")]
        semiring: SemiringChoice,
        #[arg(long, value_enum, default_value = "human")]
        format: OutputFormat,
    },
    /// Fibered product of two stochastic models over a shared linear clock.
    Compose {
        #[arg(long)]
        left: String,
        #[arg(long)]
        right: String,
        /// Name of the clock tree in both files.
        #[arg(long, default_value = "clock")]
        clock: String,
        #[arg(long, value_enum, default_value = "nonneg-rational")]
        semiring: SemiringChoice,
        #[arg(long)]
        output: Option<String>,
    },
    /// Run a full pipeline on a named built-in model.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
        #[arg(long, value_enum, default_value = "human")]
        format: OutputFormat,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn read_file(path: &str) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|e| Error::Schema(format!("{path}: {e}")))
}

fn load_empirical<W: Semiring>(args: &ModelArgs) -> Result<EmpiricalModel<W>, Error> {
    let model = format::parse_empirical::<W>(&read_file(&args.model)?)?;
    if let Some(path) = &args.scenario {
        let scenario = format::parse_scenario(&read_file(path)?)?;
        if scenario != model.scenario {
            return Err(Error::Schema(format!(
                "scenario file {path} disagrees with the model's scenario"
            )));
        }
    }
    Ok(model)
}

fn run(command: Command) -> Result<ExitCode, Error> {
    match command {
        Command::CheckNosig(args) => match args.semiring {
            SemiringChoice::Bool => check_nosig::<Boolean>(&args),
            SemiringChoice::NonNegRational => check_nosig::<NonNegRational>(&args),
            SemiringChoice::Rational => check_nosig::<SignedRational>(&args),
        },
        Command::CheckContextual(args) => match args.semiring {
            SemiringChoice::Bool => check_contextual::<Boolean>(&args, false),
            SemiringChoice::NonNegRational => check_contextual::<NonNegRational>(&args, false),
            SemiringChoice::Rational => check_contextual::<SignedRational>(&args, false),
        },
        Command::CheckStrong(args) => match args.semiring {
            SemiringChoice::Bool => check_contextual::<Boolean>(&args, true),
            SemiringChoice::NonNegRational => check_contextual::<NonNegRational>(&args, true),
            SemiringChoice::Rational => check_contextual::<SignedRational>(&args, true),
        },
        Command::GlobalSection(args) => match args.semiring {
            SemiringChoice::Bool => global_section::<Boolean>(&args),
            SemiringChoice::NonNegRational => global_section::<NonNegRational>(&args),
            SemiringChoice::Rational => global_section::<SignedRational>(&args),
        },
        Command::BuildHv { args, output } => match args.semiring {
            SemiringChoice::Bool => build_hv::<Boolean>(&args, output.as_deref()),
            SemiringChoice::NonNegRational => build_hv::<NonNegRational>(&args, output.as_deref()),
            SemiringChoice::Rational => build_hv::<SignedRational>(&args, output.as_deref()),
        },
        Command::BuildWeakHv { args, output } => match args.semiring {
            SemiringChoice::Bool => build_weak::<Boolean>(&args, output.as_deref()),
            SemiringChoice::NonNegRational => build_weak::<NonNegRational>(&args, output.as_deref()),
            SemiringChoice::Rational => build_weak::<SignedRational>(&args, output.as_deref()),
        },
        Command::ModelCheck {
            model,
            formula,
            state,
            semiring,
            format: fmt,
        } => match semiring {
            SemiringChoice::Bool => model_check::<Boolean>(&model, &formula, state.as_deref(), fmt),
            SemiringChoice::NonNegRational => {
                model_check::<NonNegRational>(&model, &formula, state.as_deref(), fmt)
            }
            SemiringChoice::Rational => {
                model_check::<SignedRational>(&model, &formula, state.as_deref(), fmt)
            }
        },
        Command::Compose {
            left,
            right,
            clock,
            semiring,
            output,
        } => match semiring {
            SemiringChoice::Bool => compose::<Boolean>(&left, &right, &clock, output.as_deref()),
            SemiringChoice::NonNegRational => {
                compose::<NonNegRational>(&left, &right, &clock, output.as_deref())
            }
            SemiringChoice::Rational => {
                compose::<SignedRational>(&left, &right, &clock, output.as_deref())
            }
        },
        Command::Demo { name, format } => demo(name, format),
    }
}

fn nosig_witness_json<W: Semiring>(model: &EmpiricalModel<W>) -> Option<serde_json::Value> {
    check_no_signalling(model).witness.map(|w| {
        serde_json::json!({
            "sub_context": context_label(&w.sub_context),
            "context0": context_label(&w.context0),
            "context1": context_label(&w.context1),
            "assignment": w.assignment.csv(&w.sub_context),
            "value0": w.value0.to_json(),
            "value1": w.value1.to_json(),
        })
    })
}

fn check_nosig<W: Semiring>(args: &ModelArgs) -> Result<ExitCode, Error> {
    let model = load_empirical::<W>(args)?;
    let report = check_no_signalling(&model);
    match args.format {
        OutputFormat::Json => {
            let verdict = format::VerdictWire {
                semiring: W::NAME.to_string(),
                no_signalling: report.holds,
                contextual: None,
                strongly_contextual: None,
                witness: nosig_witness_json(&model),
            };
            println!("{}", format::emit_verdict(&verdict));
        }
        OutputFormat::Human => {
            println!("{}", emit_table(&model));
            if let Some(w) = &report.witness {
                println!(
                    "no-signalling: violated at sub-context {}: {} gives {}, {} gives {} on {}",
                    context_label(&w.sub_context),
                    context_label(&w.context0),
                    w.value0,
                    context_label(&w.context1),
                    w.value1,
                    w.assignment.csv(&w.sub_context),
                );
            } else {
                println!("no-signalling: holds");
            }
        }
    }
    Ok(if report.holds { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn describe_certificate(cert: &SectionCertificate) -> String {
    match cert {
        SectionCertificate::Dual { rows, gap } => {
            let mut out = String::from("infeasibility certificate (dual vector):\n");
            for (label, y) in rows {
                if !num_traits::Zero::is_zero(y) {
                    let _ = writeln!(out, "  {label}: {y}");
                }
            }
            let _ = write!(out, "  certificate gap: {gap}");
            out
        }
        SectionCertificate::UncoveredSupport { context, outcome } => format!(
            "uncovered support element: outcome {} of context {}",
            outcome.csv(context),
            context_label(context)
        ),
    }
}

fn certificate_json(cert: &SectionCertificate) -> serde_json::Value {
    match cert {
        SectionCertificate::Dual { rows, gap } => serde_json::json!({
            "dual": rows
                .iter()
                .filter(|(_, y)| !num_traits::Zero::is_zero(y))
                .map(|(label, y)| serde_json::json!({"row": label, "multiplier": y.to_string()}))
                .collect::<Vec<_>>(),
            "gap": gap.to_string(),
        }),
        SectionCertificate::UncoveredSupport { context, outcome } => serde_json::json!({
            "uncovered_support": {
                "context": context_label(context),
                "outcome": outcome.csv(context),
            }
        }),
    }
}

fn section_json<W: Semiring>(
    order: &[String],
    section: &contextua::semiring::Distribution<Assignment, W>,
) -> serde_json::Value {
    let entries: serde_json::Map<String, serde_json::Value> = section
        .support()
        .map(|(a, w)| (a.csv(order), w.to_json()))
        .collect();
    serde_json::Value::Object(entries)
}

fn check_contextual<W: ScenarioSemiring>(args: &ModelArgs, strong: bool) -> Result<ExitCode, Error> {
    let model = load_empirical::<W>(args)?;
    let nosig = check_no_signalling(&model);
    if !nosig.holds {
        report_signalling_input::<W>(args, &model)?;
        return Ok(ExitCode::from(2));
    }
    let order = model.scenario.measurement_order();
    let (contextual, strongly, witness): (Option<bool>, Option<bool>, Option<serde_json::Value>) =
        if strong {
            let w = global_support_assignment(&model)?;
            let json = w.as_ref().map(|a| serde_json::json!({"assignment": a.csv(&order)}));
            (None, Some(w.is_none()), json)
        } else {
            match find_global_section(&model)? {
                SectionOutcome::Section(s) => {
                    (Some(false), None, Some(serde_json::json!({"section": section_json(&order, &s)})))
                }
                SectionOutcome::Infeasible(cert) => {
                    (Some(true), None, Some(certificate_json(&cert)))
                }
            }
        };
    match args.format {
        OutputFormat::Json => {
            let verdict = format::VerdictWire {
                semiring: W::NAME.to_string(),
                no_signalling: true,
                contextual,
                strongly_contextual: strongly,
                witness,
            };
            println!("{}", format::emit_verdict(&verdict));
        }
        OutputFormat::Human => {
            if strong {
                match global_support_assignment(&model)? {
                    Some(a) => println!(
                        "strongly contextual: false (witness assignment {})",
                        a.csv(&order)
                    ),
                    None => println!("strongly contextual: true (every global assignment leaves some support)"),
                }
            } else {
                match find_global_section(&model)? {
                    SectionOutcome::Section(s) => {
                        println!("contextual: false");
                        println!("global section:");
                        for (a, w) in s.support() {
                            println!("  {}: {}", a.csv(&order), w);
                        }
                    }
                    SectionOutcome::Infeasible(cert) => {
                        println!("contextual: true");
                        println!("{}", describe_certificate(&cert));
                    }
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn report_signalling_input<W: Semiring>(
    args: &ModelArgs,
    model: &EmpiricalModel<W>,
) -> Result<(), Error> {
    match args.format {
        OutputFormat::Json => {
            let verdict = format::VerdictWire {
                semiring: W::NAME.to_string(),
                no_signalling: false,
                contextual: None,
                strongly_contextual: None,
                witness: nosig_witness_json(model),
            };
            println!("{}", format::emit_verdict(&verdict));
        }
        OutputFormat::Human => {
            println!("error: {}", Error::SignallingInput);
            if let Some(w) = check_no_signalling(model).witness {
                println!(
                    "  witness: sub-context {} of {} vs {} at {}: {} vs {}",
                    context_label(&w.sub_context),
                    context_label(&w.context0),
                    context_label(&w.context1),
                    w.assignment.csv(&w.sub_context),
                    w.value0,
                    w.value1,
                );
            }
        }
    }
    Ok(())
}

fn global_section<W: ScenarioSemiring>(args: &ModelArgs) -> Result<ExitCode, Error> {
    let model = load_empirical::<W>(args)?;
    if !check_no_signalling(&model).holds {
        report_signalling_input::<W>(args, &model)?;
        return Ok(ExitCode::from(2));
    }
    let order = model.scenario.measurement_order();
    match find_global_section(&model)? {
        SectionOutcome::Section(s) => {
            match args.format {
                OutputFormat::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "feasible": true,
                        "section": section_json(&order, &s),
                    }))
                    .expect("json serializes")
                ),
                OutputFormat::Human => {
                    println!("feasible: a global section exists");
                    for (a, w) in s.support() {
                        println!("  {}: {}", a.csv(&order), w);
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        SectionOutcome::Infeasible(cert) => {
            match args.format {
                OutputFormat::Json => println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "feasible": false,
                        "certificate": certificate_json(&cert),
                    }))
                    .expect("json serializes")
                ),
                OutputFormat::Human => {
                    println!("infeasible: no global section");
                    println!("{}", describe_certificate(&cert));
                }
            }
            Ok(ExitCode::from(2))
        }
    }
}

fn build_hv<W: ScenarioSemiring>(args: &ModelArgs, output: Option<&str>) -> Result<ExitCode, Error> {
    let model = load_empirical::<W>(args)?;
    if !check_no_signalling(&model).holds {
        report_signalling_input::<W>(args, &model)?;
        return Ok(ExitCode::from(2));
    }
    match find_global_section(&model)? {
        SectionOutcome::Section(section) => {
            let hv = build_hv_model(&model, &section)?;
            let text = format::emit_model(&hv.model);
            write_or_print(output, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        SectionOutcome::Infeasible(cert) => {
            println!("no hidden-variable model: the model is contextual");
            println!("{}", describe_certificate(&cert));
            Ok(ExitCode::from(2))
        }
    }
}

fn build_weak<W: ScenarioSemiring>(args: &ModelArgs, output: Option<&str>) -> Result<ExitCode, Error> {
    let model = load_empirical::<W>(args)?;
    if !check_no_signalling(&model).holds {
        report_signalling_input::<W>(args, &model)?;
        return Ok(ExitCode::from(2));
    }
    match global_support_assignment(&model)? {
        Some(witness) => {
            let weak = build_weak_hv_model(&model, &witness)?;
            let text = format::emit_model(&weak);
            write_or_print(output, &text)?;
            Ok(ExitCode::SUCCESS)
        }
        None => {
            println!("no weak hidden-variable model: the model is strongly contextual");
            Ok(ExitCode::from(2))
        }
    }
}

fn write_or_print(output: Option<&str>, text: &str) -> Result<(), Error> {
    match output {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::Schema(format!("{path}: {e}")))?;
            println!("wrote {path}");
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn model_check<W: Semiring>(
    model_path: &str,
    formula_text: &str,
    state: Option<&str>,
    fmt: OutputFormat,
) -> Result<ExitCode, Error> {
    let model: StochasticModel<W> = format::parse_model(&read_file(model_path)?)?;
    let formula = logic::parse_formula(formula_text)?;
    let mut eval = Evaluator::new(&model);
    let ext = eval.extension(&formula)?;
    let target = match state {
        Some(name) => {
            let tree = model.initial_tree();
            let (node, st) = name
                .split_once('/')
                .ok_or_else(|| Error::Schema("state must be given as node/state".into()))?;
            contextua::presheaf::StateRef::new(tree.index_of(node)?, st)
        }
        None => model.root_state()?,
    };
    let truth = ext.contains(&target);
    let vacuous = eval.vacuous.contains(&target);
    match fmt {
        OutputFormat::Json => println!(
            "{}",
            serde_json::to_string_pretty(&serde_json::json!({
                "formula": logic::print_formula(&formula),
                "state": format!("{}/{}", model.initial_tree().node_id(target.stage), target.state),
                "holds": truth,
                "vacuous_quantification": vacuous,
            }))
            .expect("json serializes")
        ),
        OutputFormat::Human => {
            println!(
                "{}/{}: {}",
                model.initial_tree().node_id(target.stage),
                target.state,
                truth
            );
            if vacuous {
                println!("note: some modality held vacuously (no transition projects onto its label here)");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn compose<W: Semiring>(
    left: &str,
    right: &str,
    clock_name: &str,
    output: Option<&str>,
) -> Result<ExitCode, Error> {
    let a: StochasticModel<W> = format::parse_model(&read_file(left)?)?;
    let b: StochasticModel<W> = format::parse_model(&read_file(right)?)?;
    let clock = a
        .trees
        .get(clock_name)
        .ok_or_else(|| Error::Schema(format!("tree {clock_name} missing from {left}")))?;
    let clock_b = b
        .trees
        .get(clock_name)
        .ok_or_else(|| Error::Schema(format!("tree {clock_name} missing from {right}")))?;
    if clock != clock_b {
        return Err(Error::NotSynchronized("the two clock trees differ".into()));
    }
    let find_leg = |m: &StochasticModel<W>, path: &str| {
        m.projections
            .iter()
            .find(|p| p.from == m.initial && p.to == clock_name)
            .map(|p| p.proj.clone())
            .ok_or_else(|| Error::Schema(format!("{path} has no projection onto {clock_name}")))
    };
    let leg_a = find_leg(&a, left)?;
    let leg_b = find_leg(&b, right)?;
    let product = contextua::presheaf::fibered_product(
        &a.system,
        &leg_a,
        &b.system,
        &leg_b,
        clock,
        |x, y| format!("{x}{y}"),
    )?;
    let mut trees = indexmap::IndexMap::new();
    trees.insert("L0".to_string(), product.presheaf.base.clone());
    let composed = StochasticModel::new(trees, "L0", Vec::new(), product.presheaf, BTreeMap::new())?;
    write_or_print(output, &format::emit_model(&composed))?;
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------
// demos
// ---------------------------------------------------------------------------

struct DemoSummary {
    rows: Vec<(String, String)>,
    failures: usize,
}

impl DemoSummary {
    fn new() -> Self {
        DemoSummary { rows: Vec::new(), failures: 0 }
    }

    fn push(&mut self, what: &str, ok: bool, detail: impl Into<String>) {
        let mark = if ok { "ok " } else { "FAIL" };
        self.rows.push((format!("[{mark}] {what}"), detail.into()));
        if !ok {
            self.failures += 1;
        }
    }

    fn print(&self) {
        let width = self.rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        for (label, detail) in &self.rows {
            if detail.is_empty() {
                println!("{label}");
            } else {
                println!("{label:width$}  {detail}");
            }
        }
    }
}

fn demo(name: DemoName, fmt: OutputFormat) -> Result<ExitCode, Error> {
    match name {
        DemoName::Pr => demo_pr(fmt),
        DemoName::Hardy => demo_hardy(fmt),
        DemoName::Product => demo_product(fmt),
    }
}

fn demo_pr(fmt: OutputFormat) -> Result<ExitCode, Error> {
    let pr = canonical_pr_box();
    let order = pr.scenario.measurement_order();
    let mut summary = DemoSummary::new();

    let nosig = check_no_signalling(&pr).holds;
    summary.push("no-signalling", nosig, "");
    let section = find_global_section(&pr)?;
    let infeasible = matches!(section, SectionOutcome::Infeasible(_));
    summary.push("contextual (no global section)", infeasible, "dual certificate available");
    let strong = global_support_assignment(&pr)?.is_none();
    summary.push("strongly contextual", strong, "all 16 assignments refuted");

    let flat = empirical_to_model(&pr, false)?;
    let det = det_sentence(&pr.scenario);
    let seq = Sequent {
        antecedents: delta_pr(),
        consequent: Formula::not(det.clone()),
    };
    let v1 = logic::validates_sequent(&flat, &seq)?;
    summary.push("validates description |- not determinacy", v1, "");

    let staged = empirical_to_model(&pr, true)?;
    let seq_i = Sequent {
        antecedents: delta_pr_prefixed(),
        consequent: Formula::nec("i", Formula::not(det)),
    };
    let v2 = logic::validates_sequent(&staged, &seq_i)?;
    summary.push("validates staged description |- [i]!determinacy", v2, "");

    let report = theorem52_check(
        &pr.scenario,
        &delta_pr_prefixed(),
        ContextualityMode::Strong,
        &[("pr".to_string(), pr.clone())],
        &[("pr-staged".to_string(), staged)],
    )?;
    summary.push("characterization cross-check (strong mode)", report.consistent, "");

    match fmt {
        OutputFormat::Json => {
            println!(
                "{}",
                format::emit_verdict(&format::VerdictWire {
                    semiring: NonNegRational::NAME.to_string(),
                    no_signalling: nosig,
                    contextual: Some(infeasible),
                    strongly_contextual: Some(strong),
                    witness: match &section {
                        SectionOutcome::Infeasible(cert) => Some(certificate_json(cert)),
                        SectionOutcome::Section(s) => Some(section_json(&order, s)),
                    },
                })
            );
        }
        OutputFormat::Human => {
            println!("{}", emit_table(&pr));
            summary.print();
            if let SectionOutcome::Infeasible(cert) = &section {
                println!("{}", describe_certificate(cert));
            }
        }
    }
    Ok(if summary.failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn demo_hardy(fmt: OutputFormat) -> Result<ExitCode, Error> {
    let hardy = canonical_hardy_table();
    let supports = canonical_hardy_supports();
    let order = hardy.scenario.measurement_order();
    let mut summary = DemoSummary::new();

    let nosig = check_no_signalling(&hardy).holds;
    summary.push("no-signalling", nosig, "");
    let contextual_rat = is_contextual_outcome(&hardy)?;
    summary.push("contextual over exact rationals", contextual_rat, "simplex infeasible");
    let contextual_bool = matches!(
        find_global_section(&supports)?,
        SectionOutcome::Infeasible(_)
    );
    summary.push("contextual over booleans", contextual_bool, "support gluing fails");
    let witness = global_support_assignment(&hardy)?;
    let strong = witness.is_none();
    summary.push(
        "strongly contextual = false",
        !strong,
        witness
            .as_ref()
            .map(|a| format!("witness {}", a.csv(&order)))
            .unwrap_or_default(),
    );

    let witness = witness.ok_or_else(|| Error::Internal("the Hardy table has a witness".into()))?;
    let weak = build_weak_hv_model(&hardy, &witness)?;
    let root = weak.root_state()?;
    let mut eval = Evaluator::new(&weak);
    let det = det_sentence(&hardy.scenario);
    let claim = Formula::big_and(
        delta_hardy()
            .into_iter()
            .chain([
                Formula::pos("i", det.clone()),
                Formula::not(Formula::nec("i", det.clone())),
            ])
            .collect(),
    );
    let weak_ok = eval.extension(&claim)?.contains(&root);
    summary.push("weak hidden-variable model satisfies description, <i>Det, ![i]Det", weak_ok, "");

    let staged = empirical_to_model(&hardy, true)?;
    let seq = Sequent {
        antecedents: delta_hardy(),
        consequent: Formula::not(Formula::nec("i", det)),
    };
    let v = logic::validates_sequent(&staged, &seq)?;
    summary.push("validates description |- ![i]determinacy", v, "");

    let report = theorem52_check(
        &hardy.scenario,
        &delta_hardy(),
        ContextualityMode::Contextual,
        &[("hardy".to_string(), hardy.clone())],
        &[("hardy-staged".to_string(), staged)],
    )?;
    summary.push("characterization cross-check (contextual mode)", report.consistent, "");

    match fmt {
        OutputFormat::Json => println!(
            "{}",
            format::emit_verdict(&format::VerdictWire {
                semiring: NonNegRational::NAME.to_string(),
                no_signalling: nosig,
                contextual: Some(contextual_rat),
                strongly_contextual: Some(strong),
                witness: Some(serde_json::json!({"assignment": witness.csv(&order)})),
            })
        ),
        OutputFormat::Human => {
            println!("{}", emit_table(&hardy));
            summary.print();
        }
    }
    Ok(if summary.failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn is_contextual_outcome(model: &EmpiricalModel<NonNegRational>) -> Result<bool, Error> {
    Ok(matches!(find_global_section(model)?, SectionOutcome::Infeasible(_)))
}

fn demo_product(fmt: OutputFormat) -> Result<ExitCode, Error> {
    let product = product_demo_box();
    let order = product.scenario.measurement_order();
    let mut summary = DemoSummary::new();

    let nosig = check_no_signalling(&product).holds;
    summary.push("no-signalling", nosig, "");
    let section = match find_global_section(&product)? {
        SectionOutcome::Section(s) => s,
        SectionOutcome::Infeasible(_) => {
            return Err(Error::Internal("product models always glue".into()))
        }
    };
    summary.push("global section found", true, "product distribution");
    let strong_witness = global_support_assignment(&product)?;
    summary.push(
        "contextual = false, strongly contextual = false",
        strong_witness.is_some(),
        "",
    );

    let hv = build_hv_model(&product, &section)?;
    let root = hv.model.root_state()?;
    let mut eval = Evaluator::new(&hv.model);
    let i_det = Formula::nec("i", det_sentence(&product.scenario));
    let hv_ok = eval.extension(&i_det)?.contains(&root);
    summary.push("hidden-variable model root satisfies [i]Det", hv_ok, "");

    match fmt {
        OutputFormat::Json => println!(
            "{}",
            format::emit_verdict(&format::VerdictWire {
                semiring: NonNegRational::NAME.to_string(),
                no_signalling: nosig,
                contextual: Some(false),
                strongly_contextual: Some(false),
                witness: Some(section_json(&order, &section)),
            })
        ),
        OutputFormat::Human => {
            println!("{}", emit_table(&product));
            summary.print();
        }
    }
    Ok(if summary.failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(2) })
}
