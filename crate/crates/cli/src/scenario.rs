use std::path::Path;

use clap::ValueEnum;
use ecogame::bifurcation::summarize;
use ecogame::control::{control_thresholds, controlled_boundary_equilibrium, u_half, verify_design};
use ecogame::cycles::{reference_equilibrium, sweep_mu, sweep_u_amplitude, CycleOptions};
use ecogame::equilibria::{boundary_equilibria, corner_analysis, EquilibriumReport};
use ecogame::export::{num, to_json, trajectory_csv};
use ecogame::flow::{integrate, IntegratorOptions};
use ecogame::lienard::{check_lienard_conditions, lienard_transform};
use ecogame::model::{ParamFile, ParamFormat};
use ecogame::{Error, State, SystemParams};
use serde::{Deserialize, Serialize};

use crate::figures;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate,
    Equilibria,
    Bifurc,
    Sweep,
    ControlDesign,
    LienardCheck,
    ReproduceFigure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig2a,
    Fig2b,
    Fig3,
    Fig4a,
    Fig4b,
    Fig4c,
    Fig4d,
    Fig5a,
    Fig5b,
    Fig5c,
    Fig5d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Mu,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Task-specific settings; each task reads the fields it needs.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub x0: Option<f64>,
    pub r0: Option<f64>,
    pub t_end: Option<f64>,
    pub starts: Option<Vec<[f64; 2]>>,
    pub grid: Option<Vec<f64>>,
    pub sweep: Option<SweepKind>,
    pub verify: Option<bool>,
    /// Minimum time between written trajectory rows.
    pub sample_dt: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    pub task: Task,
    pub figure: Option<FigureId>,
    pub params: ParamFile,
    #[serde(default)]
    pub options: Options,
}

pub struct Scenario {
    pub name: String,
    pub task: Task,
    pub figure: Option<FigureId>,
    pub params: Option<SystemParams>,
    pub options: Options,
}

impl Scenario {
    pub fn parse(text: &str, format: ParamFormat) -> Result<Self, Error> {
        let file: ScenarioFile = match format {
            ParamFormat::Json => serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?,
            ParamFormat::Toml => toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?,
        };
        if file.task == Task::ReproduceFigure && file.figure.is_none() {
            return Err(Error::Config("task reproduce-figure needs a figure id".into()));
        }
        Ok(Scenario {
            name: file.name,
            task: file.task,
            figure: file.figure,
            params: Some(file.params.into_params()?),
            options: file.options,
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let format = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ParamFormat::Json,
            Some("toml") => ParamFormat::Toml,
            other => return Err(Error::Config(format!("scenario extension {other:?} (want .json or .toml)"))),
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, format)
    }
}

pub struct Artifact {
    pub name: String,
    pub body: String,
}

impl Artifact {
    pub fn new(name: impl Into<String>, body: String) -> Self {
        Artifact { name: name.into(), body }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<CheckResult>,
}

impl Outcome {
    fn plain(artifacts: Vec<Artifact>) -> Self {
        Outcome { artifacts, checks: Vec::new() }
    }

    pub fn failed(&self) -> Vec<&CheckResult> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

pub struct Settings {
    pub format: Format,
    pub tol: Option<f64>,
}

impl Settings {
    pub fn integrator(&self, t_end: f64) -> IntegratorOptions {
        let o = IntegratorOptions::until(t_end);
        IntegratorOptions { rel_tol: self.tol.unwrap_or(o.rel_tol), ..o }
    }

    pub fn cycles(&self) -> CycleOptions {
        let o = CycleOptions::default();
        CycleOptions {
            integrator: IntegratorOptions { rel_tol: self.tol.unwrap_or(o.integrator.rel_tol), ..o.integrator },
            ..o
        }
    }
}

fn need<T>(v: Option<T>, what: &str) -> Result<T, Error> {
    v.ok_or_else(|| Error::Config(format!("missing option {what}")))
}

fn equilibria_csv(list: &[EquilibriumReport]) -> String {
    let mut out = String::from("kind,x,r,stability,re1,im1,re2,im2\n");
    for e in list {
        let kind = serde_json::to_value(e.kind).unwrap();
        let stab = serde_json::to_value(e.stability).unwrap();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            kind.as_str().unwrap_or_default(),
            num(e.location.x),
            num(e.location.r),
            stab.as_str().unwrap_or_default(),
            num(e.eigenvalues[0].re),
            num(e.eigenvalues[0].im),
            num(e.eigenvalues[1].re),
            num(e.eigenvalues[1].im),
        ));
    }
    out
}

fn all_equilibria(p: &SystemParams) -> Result<Vec<EquilibriumReport>, Error> {
    let mut list: Vec<EquilibriumReport> = reference_equilibrium(p)?.into_iter().collect();
    if p.u == 0.0 {
        if p.mu > 0.0 {
            list.extend(boundary_equilibria(p)?);
        } else {
            list.extend(corner_analysis(p)?.corners);
        }
    } else if p.u > u_half(p) && p.mu > 0.0 {
        let t = controlled_boundary_equilibrium(p)?;
        list.push(t.main);
        list.extend(t.others);
    }
    Ok(list)
}

pub fn execute(sc: &Scenario, set: &Settings) -> Result<Outcome, Error> {
    if sc.task == Task::ReproduceFigure {
        let fig = need(sc.figure, "figure")?;
        let p = need(sc.params, "params")?;
        return figures::run(fig, &sc.name, &p, &sc.options, set);
    }
    let p = sc.params.ok_or_else(|| Error::Config("no parameters given (use --params)".into()))?;
    let o = &sc.options;
    let json = set.format == Format::Json;
    Ok(match sc.task {
        Task::Simulate => {
            let s0 = State::new(need(o.x0, "x0")?, need(o.r0, "r0")?)?;
            let tr = integrate(s0, &p, &set.integrator(o.t_end.unwrap_or(100.0)))?;
            Outcome::plain(vec![if json {
                Artifact::new("trajectory.json", to_json(&tr))
            } else {
                Artifact::new("trajectory.csv", trajectory_csv(&tr))
            }])
        }
        Task::Equilibria => {
            let list = all_equilibria(&p)?;
            Outcome::plain(vec![if json {
                Artifact::new("equilibria.json", to_json(&list))
            } else {
                Artifact::new("equilibria.csv", equilibria_csv(&list))
            }])
        }
        Task::Bifurc => Outcome::plain(vec![Artifact::new("bifurc.json", to_json(&summarize(&p)?))]),
        Task::Sweep => {
            let grid = need(o.grid.clone(), "grid")?;
            match o.sweep.unwrap_or(SweepKind::Mu) {
                SweepKind::Mu => {
                    let d = sweep_mu(&p, &grid, &set.cycles())?;
                    Outcome::plain(vec![if json {
                        Artifact::new("diagram.json", to_json(&d))
                    } else {
                        Artifact::new("diagram.csv", d.to_csv())
                    }])
                }
                SweepKind::U => {
                    let s = sweep_u_amplitude(&p, &grid, &set.cycles())?;
                    Outcome::plain(vec![if json {
                        Artifact::new("amplitude.json", to_json(&s))
                    } else {
                        Artifact::new("amplitude.csv", figures::amplitude_csv(&s))
                    }])
                }
            }
        }
        Task::ControlDesign => {
            let design = control_thresholds(&p)?;
            if o.verify.unwrap_or(false) {
                let check = verify_design(&p, &design)?;
                let worst = check.runs.iter().map(|r| r.distance).fold(0.0, f64::max);
                let body = to_json(&serde_json::json!({ "design": design, "verification": check }));
                Outcome {
                    artifacts: vec![Artifact::new("control.json", body)],
                    checks: vec![CheckResult {
                        name: "recommended subsidy drives the start grid to the target".into(),
                        passed: check.passed,
                        detail: format!("worst final distance {}", num(worst)),
                    }],
                }
            } else {
                Outcome::plain(vec![Artifact::new("control.json", to_json(&design))])
            }
        }
        Task::LienardCheck => {
            let report = check_lienard_conditions(&lienard_transform(&p)?);
            let passed = report.all_pass();
            Outcome {
                artifacts: vec![Artifact::new("lienard.json", to_json(&report))],
                checks: vec![CheckResult {
                    name: "uniqueness conditions".into(),
                    passed,
                    detail: String::new(),
                }],
            }
        }
        Task::ReproduceFigure => unreachable!(),
    })
}
