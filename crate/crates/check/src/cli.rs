use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::Serialize;

use crate::aut::write_aut;
use crate::lts::Lts;
use crate::models::{self, EnterGuard, Mutant};
use crate::properties::{self, Dims, Kind, Property, Verdict};
use crate::{CheckError, DEFAULT_STATE_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    BfSpec,
    BfImpl,
    Termlib,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Safety,
    Liveness,
    Entry,
    Equivalence,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GuardKind {
    WithLeaving,
    WithoutLeaving,
}

impl From<GuardKind> for EnterGuard {
    fn from(g: GuardKind) -> Self {
        match g {
            GuardKind::WithLeaving => EnterGuard::WithLeaving,
            GuardKind::WithoutLeaving => EnterGuard::WithoutLeaving,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "tf-check", about = "Model checks the busy-forbidden lock and the term library")]
pub struct Args {
    #[arg(long, value_enum)]
    pub model: ModelKind,
    #[arg(long)]
    pub threads: usize,
    #[arg(long, default_value_t = 1)]
    pub terms: usize,
    #[arg(long, default_value_t = 1)]
    pub addresses: usize,
    #[arg(long, value_enum, default_value = "all")]
    pub check: CheckKind,
    /// Seeded bug for the implementation model (no-sometimes,
    /// skip-busy-recheck, no-forbidden-reset, no-retry-loop).
    #[arg(long, default_value = "none")]
    pub mutant: String,
    /// Guard variant of the lock specification.
    #[arg(long, value_enum, default_value = "with-leaving")]
    pub guard: GuardKind,
    /// Keep `improbable` visible in the equivalence check.
    #[arg(long)]
    pub keep_improbable: bool,
    #[arg(long)]
    pub export: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub state_cap: usize,
    /// Print the JSON report on stdout instead of the human-readable one.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub model: ModelKind,
    pub threads: usize,
    pub terms: Option<usize>,
    pub addresses: Option<usize>,
    pub mutant: String,
    pub states: usize,
    pub transitions: usize,
    pub verdicts: Vec<Verdict>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn render(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(
            out,
            "{:?} with {} thread(s): {} states, {} transitions",
            self.model, self.threads, self.states, self.transitions
        )?;
        for v in &self.verdicts {
            let tag = if v.holds { "PASS" } else { "FAIL" };
            writeln!(out, "{tag} {} ({})", v.property, v.title)?;
            if let Some(note) = &v.note {
                writeln!(out, "  {note}")?;
            }
            for (i, a) in v.trace.iter().enumerate() {
                writeln!(out, "  {i:>4}  {a}")?;
            }
        }
        Ok(())
    }
}

fn wanted(check: CheckKind, kind: Kind) -> bool {
    matches!(
        (check, kind),
        (CheckKind::All, _)
            | (CheckKind::Safety, Kind::Safety)
            | (CheckKind::Liveness, Kind::Liveness)
            | (CheckKind::Entry, Kind::Entry)
    )
}

fn equivalence_verdict(args: &Args, mutant: Mutant) -> Result<Verdict, CheckError> {
    let eq = models::equivalence(args.threads, args.guard.into(), mutant, args.keep_improbable, args.state_cap)?;
    Ok(Verdict {
        property: "equivalence",
        title: "specification and implementation are divergence-preserving branching bisimilar",
        holds: eq.equivalent,
        trace: Vec::new(),
        note: (!eq.equivalent).then(|| {
            format!(
                "initial states fall in distinct classes {} (spec) and {} (impl) of {}",
                eq.left_class, eq.right_class, eq.classes
            )
        }),
    })
}

pub fn run(args: &Args) -> Result<Report, CheckError> {
    if args.threads == 0 || args.threads > 8 {
        return Err(CheckError::Usage("--threads must be between 1 and 8".into()));
    }
    let mutant: Mutant = args.mutant.parse()?;
    if mutant != Mutant::None && args.model != ModelKind::BfImpl {
        return Err(CheckError::Usage("--mutant applies to the bf-impl model only".into()));
    }
    let termlib = args.model == ModelKind::Termlib;
    if termlib && args.check == CheckKind::Equivalence {
        return Err(CheckError::Usage("equivalence is defined for the lock models only".into()));
    }
    if termlib && (args.terms == 0 || args.addresses == 0 || args.terms > 8 || args.addresses > 8) {
        return Err(CheckError::Usage("--terms and --addresses must be between 1 and 8".into()));
    }

    let lts: Lts = match args.model {
        ModelKind::BfSpec => models::build_spec_lts(args.threads, args.guard.into(), args.state_cap)?,
        ModelKind::BfImpl => models::build_impl_lts(args.threads, mutant, args.state_cap)?,
        ModelKind::Termlib => models::build_termlib_lts(args.threads, args.terms, args.addresses, args.state_cap)?,
    };
    if let Some(path) = &args.export {
        let mut w = BufWriter::new(File::create(path)?);
        write_aut(&lts, &mut w)?;
        w.flush()?;
    }

    let dims = Dims {
        threads: args.threads,
        terms: args.terms,
        addresses: args.addresses,
    };
    let catalogue: &[Property] = if termlib { &Property::LIBRARY } else { &Property::LOCK };
    let mut verdicts = Vec::new();
    for &p in catalogue {
        if wanted(args.check, p.kind()) {
            verdicts.push(properties::check(&lts, p, dims, args.state_cap)?);
        }
    }
    if !termlib && matches!(args.check, CheckKind::Equivalence | CheckKind::All) {
        verdicts.push(equivalence_verdict(args, mutant)?);
    }

    Ok(Report {
        model: args.model,
        threads: args.threads,
        terms: termlib.then_some(args.terms),
        addresses: termlib.then_some(args.addresses),
        mutant: mutant.to_string(),
        states: lts.num_states(),
        transitions: lts.num_transitions(),
        verdicts,
    })
}
