//! Reader for translator output in SAS+ format version 3.

use crate::error::{Error, Result};
use crate::model::{Action, Agent, Fact, Task, Variable};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    fn next(&mut self) -> Result<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok(t);
            }
        }
        Err(Error::Parse {
            line: self.line + 1,
            msg: "unexpected end of input".into(),
        })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let l = self.next()?;
        if l != word {
            return Err(self.err(format!("expected `{word}`, found `{l}`")));
        }
        Ok(())
    }

    fn number<T: std::str::FromStr>(&mut self) -> Result<T> {
        let l = self.next()?;
        l.parse()
            .map_err(|_| self.err(format!("expected a number, found `{l}`")))
    }

    fn numbers(&mut self) -> Result<Vec<i64>> {
        let l = self.next()?;
        l.split_whitespace()
            .map(|t| {
                t.parse::<i64>()
                    .map_err(|_| self.err(format!("expected numbers, found `{l}`")))
            })
            .collect()
    }

    fn fact(&mut self, task_vars: &[Variable]) -> Result<Fact> {
        let nums = self.numbers()?;
        if nums.len() != 2 {
            return Err(self.err("expected `var value`"));
        }
        self.checked_fact(task_vars, nums[0], nums[1])
    }

    fn checked_fact(&self, vars: &[Variable], var: i64, val: i64) -> Result<Fact> {
        if var < 0 || var as usize >= vars.len() {
            return Err(self.err(format!("variable {var} out of range")));
        }
        if val < 0 || val as usize >= vars[var as usize].domain_size() {
            return Err(self.err(format!("value {val} out of range for variable {var}")));
        }
        Ok(Fact::new(var as usize, val as u32))
    }
}

/// Parses a translator output file. All actions are owned by a single
/// placeholder agent until a partition is applied.
pub fn parse_sas(bytes: &[u8]) -> Result<Task> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 0,
        msg: format!("input is not UTF-8: {e}"),
    })?;
    let mut lines = Lines::new(text);

    lines.expect("begin_version")?;
    let version = lines.next()?;
    if version != "3" {
        return Err(Error::UnsupportedVersion(version.to_string()));
    }
    lines.expect("end_version")?;

    lines.expect("begin_metric")?;
    let metric: u32 = lines.number()?;
    if metric > 1 {
        return Err(lines.err(format!("metric flag must be 0 or 1, found {metric}")));
    }
    lines.expect("end_metric")?;

    let nvars: usize = lines.number()?;
    let mut variables = Vec::with_capacity(nvars);
    for _ in 0..nvars {
        lines.expect("begin_variable")?;
        let name = lines.next()?.to_string();
        let layer: i64 = lines.number()?;
        if layer != -1 {
            return Err(Error::UnsupportedFeature {
                line: lines.line,
                feature: format!("derived variable `{name}` (axiom layer {layer})"),
            });
        }
        let size: usize = lines.number()?;
        if size == 0 {
            return Err(lines.err(format!("variable `{name}` has an empty domain")));
        }
        let domain = (0..size)
            .map(|_| lines.next().map(str::to_string))
            .collect::<Result<_>>()?;
        lines.expect("end_variable")?;
        variables.push(Variable { name, domain });
    }

    // Mutex groups carry no information the planners use.
    let nmutex: usize = lines.number()?;
    for _ in 0..nmutex {
        lines.expect("begin_mutex_group")?;
        let n: usize = lines.number()?;
        for _ in 0..n {
            lines.fact(&variables)?;
        }
        lines.expect("end_mutex_group")?;
    }

    lines.expect("begin_state")?;
    let mut init = Vec::with_capacity(nvars);
    for var in 0..nvars {
        let val: i64 = lines.number()?;
        init.push(lines.checked_fact(&variables, var as i64, val)?.val);
    }
    lines.expect("end_state")?;

    lines.expect("begin_goal")?;
    let ngoal: usize = lines.number()?;
    let goal = (0..ngoal)
        .map(|_| lines.fact(&variables))
        .collect::<Result<Vec<_>>>()?;
    lines.expect("end_goal")?;

    let nops: usize = lines.number()?;
    let mut actions = Vec::with_capacity(nops);
    for _ in 0..nops {
        lines.expect("begin_operator")?;
        let name = lines.next()?.to_string();
        let nprevail: usize = lines.number()?;
        let mut pre = Vec::new();
        for _ in 0..nprevail {
            pre.push(lines.fact(&variables)?);
        }
        let neff: usize = lines.number()?;
        let mut eff = Vec::with_capacity(neff);
        for _ in 0..neff {
            let nums = lines.numbers()?;
            let Some(&ncond) = nums.first() else {
                return Err(lines.err("empty effect line"));
            };
            if ncond != 0 {
                return Err(Error::UnsupportedFeature {
                    line: lines.line,
                    feature: format!("conditional effect in operator `{name}`"),
                });
            }
            if nums.len() != 4 {
                return Err(lines.err("expected `0 var pre post`"));
            }
            let (var, old, new) = (nums[1], nums[2], nums[3]);
            if old != -1 {
                pre.push(lines.checked_fact(&variables, var, old)?);
            }
            eff.push(lines.checked_fact(&variables, var, new)?);
        }
        let cost: i64 = lines.number()?;
        if cost < 0 {
            return Err(lines.err(format!("negative cost {cost}")));
        }
        lines.expect("end_operator")?;
        actions.push(Action {
            name,
            owner: 0,
            pre,
            eff,
            cost: if metric == 1 { cost as u64 } else { 1 },
        });
    }

    let naxioms: usize = lines.number()?;
    if naxioms != 0 {
        return Err(Error::UnsupportedFeature {
            line: lines.line,
            feature: format!("{naxioms} axiom rules"),
        });
    }

    let task = Task {
        variables,
        init,
        goal,
        actions,
        agents: vec![Agent::named("agent0")],
    };
    task.validate()?;
    Ok(task)
}
