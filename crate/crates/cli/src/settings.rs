//! Flag/config-file merging and unit conversion.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use smallworld::experiments::DGrid;
use smallworld::{NetworkConfig, Point, Rect, TieBreak};

use crate::args::{Format, GeometryArgs, OutputArgs, SimArgs, TieBreakArg};
use crate::CliError;

const KNOWN_KEYS: &[&str] = &[
    "R",
    "r",
    "absolute",
    "delta",
    "seed",
    "no-lrc",
    "tie-break",
    "trials",
    "threads",
    "n",
    "d",
    "d-grid",
    "seeds",
    "format",
    "node",
    "region",
];

pub const DEFAULT_SIDE: f64 = 20.0;
pub const DEFAULT_DELTA: f64 = 0.1;

/// Values read from a `--config` file. Keys match the long flag names; `#` starts a
/// comment. `region` may repeat.
#[derive(Debug, Default)]
pub struct FileLayer {
    values: BTreeMap<String, Vec<String>>,
}

impl FileLayer {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            let key = key.trim().trim_start_matches("--");
            if !KNOWN_KEYS.contains(&key) {
                return Err(format!("line {}: unknown key {key:?}", lineno + 1));
            }
            values.entry(key.to_string()).or_default().push(value.trim().to_string());
        }
        Ok(Self { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(|v| v.last()).map(String::as_str)
    }

    fn all(&self, key: &str) -> &[String] {
        self.values.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    fn typed<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key)
            .map(|s| s.parse::<T>().map_err(|_| invalid(format!("config key {key}: cannot parse {s:?}"))))
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(s) => Err(invalid(format!("config key {key}: expected true/false, got {s:?}"))),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

/// Geometry with every length resolved to absolute units.
#[derive(Debug, Clone, Copy)]
pub struct Geometry {
    pub side: f64,
    pub range: f64,
    /// Multiplier applied to user-supplied lengths.
    pub unit: f64,
}

impl Geometry {
    pub fn resolve(args: &GeometryArgs, file: &FileLayer) -> Result<Self, CliError> {
        let range = match args.range {
            Some(r) => r,
            None => file.typed("r")?.unwrap_or(1.0),
        };
        let absolute = args.absolute || file.flag("absolute")?;
        let unit = if absolute { 1.0 } else { range };
        let side = args.side.or(file.typed("R")?).map_or(DEFAULT_SIDE * range, |s| s * unit);
        Ok(Self { side, range, unit })
    }

    pub fn length(&self, v: f64) -> f64 {
        v * self.unit
    }
}

pub struct Output {
    pub out: Option<std::path::PathBuf>,
    pub format: Format,
}

impl Output {
    pub fn resolve(args: &OutputArgs, file: &FileLayer) -> Result<Self, CliError> {
        let format = match args.format {
            Some(f) => f,
            None => match file.get("format") {
                None | Some("csv") => Format::Csv,
                Some("json") => Format::Json,
                Some(s) => return Err(invalid(format!("config key format: expected csv or json, got {s:?}"))),
            },
        };
        Ok(Self { out: args.out.clone(), format })
    }
}

/// Simulation settings shared by the Monte Carlo commands.
pub struct Sim {
    pub template: NetworkConfig,
    pub trials: usize,
    pub threads: Option<usize>,
}

impl Sim {
    pub fn resolve(args: &SimArgs, geo: &Geometry, file: &FileLayer, default_trials: usize) -> Result<Self, CliError> {
        let delta = args.delta.or(file.typed("delta")?).map_or(DEFAULT_DELTA * geo.range, |v| geo.length(v));
        let tie_break = match args.tie_break {
            Some(t) => t.into(),
            None => match file.get("tie-break") {
                None | Some("uniform") => TieBreak::Uniform,
                Some("max-progress") => TieBreakArg::MaxProgress.into(),
                Some(s) => return Err(invalid(format!("config key tie-break: unknown value {s:?}"))),
            },
        };
        let template = NetworkConfig {
            side: geo.side,
            range: geo.range,
            delta,
            relays: 1,
            lrc_enabled: !(args.no_lrc || file.flag("no-lrc")?),
            tie_break,
            seed: args.seed.or(file.typed("seed")?).unwrap_or(0),
        };
        template.validate()?;
        let trials = args.trials.or(file.typed("trials")?).unwrap_or(default_trials);
        if trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        let threads = args.threads.or(file.typed("threads")?);
        if threads == Some(0) {
            return Err(invalid("threads must be at least 1"));
        }
        Ok(Self { template, trials, threads })
    }
}

pub fn relay_list(flag: Option<&str>, file: &FileLayer, default: &[usize]) -> Result<Vec<usize>, CliError> {
    let Some(text) = flag.or(file.get("n")) else { return Ok(default.to_vec()) };
    let list = text
        .split(',')
        .map(|s| {
            let n: usize = s.trim().parse().map_err(|_| invalid(format!("--n: cannot parse {s:?} as a count")))?;
            if n == 0 {
                return Err(invalid("--n: relay counts must be at least 1"));
            }
            Ok(n)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if list.is_empty() {
        return Err(invalid("--n: empty list"));
    }
    Ok(list)
}

pub fn separation(flag: Option<f64>, file: &FileLayer, geo: &Geometry) -> Result<f64, CliError> {
    let d =
        flag.or(file.typed("d")?).ok_or_else(|| invalid("--d is required (source-target separation, units of r)"))?;
    Ok(geo.length(d))
}

pub fn seed_count(flag: Option<usize>, file: &FileLayer) -> Result<usize, CliError> {
    let seeds = flag.or(file.typed("seeds")?).unwrap_or(1);
    if seeds == 0 {
        return Err(invalid("--seeds must be at least 1"));
    }
    Ok(seeds)
}

/// `start:stop:step` in user units; the grid itself is kept in units of r.
pub fn d_grid(flag: Option<&str>, file: &FileLayer, geo: &Geometry) -> Result<DGrid, CliError> {
    let Some(text) = flag.or(file.get("d-grid")) else {
        return Ok(DGrid::new(0.0, geo.side / (2.0 * geo.range) - 1.0, 0.25)?);
    };
    let parts = floats(text, 3, "--d-grid", "start:stop:step", ':')?;
    let [start, stop, step] = [parts[0], parts[1], parts[2]].map(|v| geo.length(v) / geo.range);
    Ok(DGrid::new(start, stop, step)?)
}

pub fn node(flag: Option<&str>, file: &FileLayer, geo: &Geometry) -> Result<Point, CliError> {
    match flag.or(file.get("node")) {
        None => Ok(Point::new(geo.side / 2.0, geo.side / 2.0)),
        Some(text) => {
            let v = floats(text, 2, "--node", "x,y", ',')?;
            Ok(Point::new(geo.length(v[0]), geo.length(v[1])))
        }
    }
}

pub fn regions(flags: &[String], file: &FileLayer, geo: &Geometry) -> Result<Vec<Rect>, CliError> {
    let texts: Vec<&str> = if flags.is_empty() {
        file.all("region").iter().map(String::as_str).collect()
    } else {
        flags.iter().map(String::as_str).collect()
    };
    if texts.is_empty() {
        return Ok(default_regions(geo.side));
    }
    texts
        .into_iter()
        .map(|t| {
            let v = floats(t, 4, "--region", "x0,y0,x1,y1", ',')?;
            let [x0, y0, x1, y1] = [v[0], v[1], v[2], v[3]].map(|x| geo.length(x));
            if !(x0 < x1 && y0 < y1) {
                return Err(invalid(format!("--region {t:?}: need x0 < x1 and y0 < y1")));
            }
            Ok(Rect::new(x0, y0, x1, y1)?)
        })
        .collect()
}

/// The four quadrants plus an off-centre box.
pub fn default_regions(side: f64) -> Vec<Rect> {
    let h = side / 2.0;
    let rect = |x0, y0, x1, y1| Rect { x0, y0, x1, y1 };
    vec![
        rect(0.0, 0.0, h, h),
        rect(h, 0.0, side, h),
        rect(0.0, h, h, side),
        rect(h, h, side, side),
        rect(0.6 * side, 0.55 * side, 0.9 * side, 0.8 * side),
    ]
}

fn floats(text: &str, count: usize, flag: &str, shape: &str, sep: char) -> Result<Vec<f64>, CliError> {
    let v: Vec<f64> = text
        .split(sep)
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(format!("{flag}: expected {shape}, got {text:?}")))?;
    if v.len() != count || v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{flag}: expected {shape}, got {text:?}")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_repeats() {
        let f = FileLayer::parse("# header\nR = 30\nregion=0,0,1,1\nregion=1,1,2,2 # second\n").unwrap();
        assert_eq!(f.get("R"), Some("30"));
        assert_eq!(f.all("region").len(), 2);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        assert!(FileLayer::parse("bogus=1").unwrap_err().contains("unknown key"));
        assert!(FileLayer::parse("R 30").unwrap_err().contains("key=value"));
    }

    #[test]
    fn lengths_scale_with_r_unless_absolute() {
        let file = FileLayer::default();
        let g =
            Geometry::resolve(&GeometryArgs { side: Some(20.0), range: Some(2.0), absolute: false }, &file).unwrap();
        assert_eq!((g.side, g.length(3.0)), (40.0, 6.0));
        let g = Geometry::resolve(&GeometryArgs { side: Some(20.0), range: Some(2.0), absolute: true }, &file).unwrap();
        assert_eq!((g.side, g.length(3.0)), (20.0, 3.0));
    }

    #[test]
    fn flags_override_file() {
        let file = FileLayer::parse("r=2\nR=10\nn=5,6").unwrap();
        let g = Geometry::resolve(&GeometryArgs { side: Some(12.0), ..Default::default() }, &file).unwrap();
        assert_eq!((g.side, g.range), (24.0, 2.0));
        assert_eq!(relay_list(Some("7"), &file, &[1]).unwrap(), vec![7]);
        assert_eq!(relay_list(None, &file, &[1]).unwrap(), vec![5, 6]);
    }

    #[test]
    fn malformed_lists() {
        let file = FileLayer::default();
        assert!(relay_list(Some("10,x"), &file, &[1]).is_err());
        assert!(relay_list(Some("0"), &file, &[1]).is_err());
        let geo = Geometry { side: 20.0, range: 1.0, unit: 1.0 };
        assert!(d_grid(Some("0:5"), &file, &geo).is_err());
        assert!(regions(&["1,1,0,2".into()], &file, &geo).is_err());
        assert_eq!(d_grid(Some("0:2:0.5"), &file, &geo).unwrap().points().len(), 5);
        let abs = Geometry { side: 40.0, range: 2.0, unit: 1.0 };
        assert_eq!(d_grid(Some("0:4:1"), &file, &abs).unwrap().points(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(d_grid(None, &file, &abs).unwrap().points().last(), Some(&9.0));
    }
}
