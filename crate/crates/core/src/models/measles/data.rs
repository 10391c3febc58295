use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MeaslesNetwork, MeaslesParams};
use crate::error::{Error, Result};
use crate::grid::build_time_grid;
use crate::model::{simulate_pomp, Model, ObsSeries};
use crate::rng::RngStream;

const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CityInfo {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
    pub population: f64,
}

/// Case reports, births and geography for a set of cities. Times are days
/// since 1 January of `start_year`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeaslesData {
    pub cities: Vec<CityInfo>,
    pub distances: Vec<Vec<f64>>,
    pub births: Vec<HashMap<i32, f64>>,
    pub start_year: i32,
    pub t0: f64,
    pub obs_times: Vec<f64>,
    pub cases: ObsSeries,
}

/// Great-circle distance between two points given in degrees.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().asin()
}

#[derive(Deserialize)]
struct CityRow {
    city: String,
    lat: f64,
    lon: f64,
    population: f64,
}

#[derive(Deserialize)]
struct BirthRow {
    year: i32,
    city: String,
    births: f64,
}

#[derive(Deserialize)]
struct CaseRow {
    date: String,
    city: String,
    cases: String,
}

#[derive(Deserialize)]
struct DistanceRow {
    city1: String,
    city2: String,
    distance: f64,
}

fn city_index(cities: &[CityInfo], name: &str) -> Result<usize> {
    cities
        .iter()
        .position(|c| c.name == name)
        .ok_or_else(|| Error::DataMismatch(format!("unknown city `{name}`")))
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::DataMismatch(format!("bad date `{s}`: {e}")))
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

impl MeaslesData {
    /// Reads the city table, births, biweekly cases and optional distances.
    /// Missing distances are computed as great-circle distances.
    pub fn from_readers<A: Read, B: Read, C: Read, D: Read>(
        cities: A,
        births: B,
        cases: C,
        distances: Option<D>,
    ) -> Result<Self> {
        let cities: Vec<CityInfo> = reader(cities)
            .deserialize::<CityRow>()
            .map(|r| {
                r.map(|r| CityInfo {
                    name: r.city,
                    lat: r.lat,
                    lon: r.lon,
                    population: r.population,
                })
            })
            .collect::<std::result::Result<_, _>>()?;
        if cities.is_empty() {
            return Err(Error::DataMismatch("no cities".into()));
        }
        let k = cities.len();

        let mut birth_maps = vec![HashMap::new(); k];
        for row in reader(births).deserialize::<BirthRow>() {
            let row = row?;
            birth_maps[city_index(&cities, &row.city)?].insert(row.year, row.births);
        }

        let mut by_date: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
        for row in reader(cases).deserialize::<CaseRow>() {
            let row = row?;
            let date = parse_date(&row.date)?;
            let idx = city_index(&cities, &row.city)?;
            let value = match row.cases.as_str() {
                "" | "NA" | "NaN" => f64::NAN,
                s => s
                    .parse::<f64>()
                    .map_err(|e| Error::DataMismatch(format!("bad case count `{s}`: {e}")))?,
            };
            let pos = match by_date.binary_search_by(|(d, _)| d.cmp(&date)) {
                Ok(p) => p,
                Err(p) => {
                    by_date.insert(p, (date, vec![f64::NAN; k]));
                    p
                }
            };
            by_date[pos].1[idx] = value;
        }
        if by_date.is_empty() {
            return Err(Error::DataMismatch("no case reports".into()));
        }
        let start_year = by_date[0].0.year();
        let origin = NaiveDate::from_ymd_opt(start_year, 1, 1).expect("valid date");
        let obs_times: Vec<f64> = by_date.iter().map(|(d, _)| (*d - origin).num_days() as f64).collect();
        let spacing = if obs_times.len() > 1 {
            obs_times[1] - obs_times[0]
        } else {
            14.0
        };
        let t0 = obs_times[0] - spacing;

        let mut dist = vec![vec![0.0; k]; k];
        match distances {
            Some(r) => {
                for row in reader(r).deserialize::<DistanceRow>() {
                    let row = row?;
                    let (a, b) = (city_index(&cities, &row.city1)?, city_index(&cities, &row.city2)?);
                    dist[a][b] = row.distance;
                    dist[b][a] = row.distance;
                }
            }
            None => {
                for a in 0..k {
                    for b in 0..k {
                        if a != b {
                            dist[a][b] = haversine_km(cities[a].lat, cities[a].lon, cities[b].lat, cities[b].lon);
                        }
                    }
                }
            }
        }
        Ok(MeaslesData {
            cities,
            distances: dist,
            births: birth_maps,
            start_year,
            t0,
            obs_times,
            cases: by_date.into_iter().map(|(_, v)| v).collect(),
        })
    }

    pub fn from_files(cities: &Path, births: &Path, cases: &Path, distances: Option<&Path>) -> Result<Self> {
        let open = |p: &Path| std::fs::File::open(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())));
        MeaslesData::from_readers(
            open(cities)?,
            open(births)?,
            open(cases)?,
            distances.map(open).transpose()?,
        )
    }

    fn date_of(&self, t: f64) -> NaiveDate {
        let origin = NaiveDate::from_ymd_opt(self.start_year, 1, 1).expect("valid date");
        origin + chrono::Duration::days(t.round() as i64)
    }

    pub fn write_cities<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["city", "lat", "lon", "population"])?;
        for c in &self.cities {
            out.write_record([
                c.name.clone(),
                c.lat.to_string(),
                c.lon.to_string(),
                c.population.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_births<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["year", "city", "births"])?;
        for (c, map) in self.cities.iter().zip(&self.births) {
            let mut years: Vec<_> = map.keys().copied().collect();
            years.sort_unstable();
            for y in years {
                out.write_record([y.to_string(), c.name.clone(), map[&y].to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_cases<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["date", "city", "cases"])?;
        for (t, row) in self.obs_times.iter().zip(&self.cases) {
            let date = self.date_of(*t).format("%Y-%m-%d").to_string();
            for (c, v) in self.cities.iter().zip(row) {
                let cell = if v.is_nan() { "NA".to_string() } else { v.to_string() };
                out.write_record([date.clone(), c.name.clone(), cell])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `cities.csv`, `births.csv` and `cases.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let create = |name: &str| std::fs::File::create(dir.join(name)).map_err(Error::from);
        self.write_cities(create("cities.csv")?)?;
        self.write_births(create("births.csv")?)?;
        self.write_cases(create("cases.csv")?)?;
        Ok(())
    }
}

/// Settings for a simulated city network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub cities: usize,
    pub years: usize,
    #[serde(default = "start_year")]
    pub start_year: i32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub params: MeaslesParams,
}

fn start_year() -> i32 {
    1950
}

/// Random city network with biweekly case reports simulated from the model
/// at `spec.params`.
pub fn synthetic_network(spec: &SyntheticSpec, euler_dt: f64) -> Result<MeaslesData> {
    if spec.cities == 0 || spec.years == 0 {
        return Err(Error::Config("synthetic network needs cities and years".into()));
    }
    let root = RngStream::new(spec.seed);
    let mut geo = root.child(1).rng();
    let mut cities: Vec<CityInfo> = (0..spec.cities)
        .map(|c| CityInfo {
            name: format!("city_{}", c + 1),
            lat: geo.random_range(50.5..54.5),
            lon: geo.random_range(-3.0..0.5),
            population: (geo.random_range(50_000f64.ln()..1_000_000f64.ln())).exp().round(),
        })
        .collect();
    cities.sort_by(|a, b| b.population.total_cmp(&a.population));
    for (i, c) in cities.iter_mut().enumerate() {
        c.name = format!("city_{}", i + 1);
    }
    let k = cities.len();
    let births = cities
        .iter()
        .map(|c| {
            (spec.start_year - 5..=spec.start_year + spec.years as i32)
                .map(|y| (y, (0.02 * c.population * geo.random_range(0.9..1.1)).round()))
                .collect()
        })
        .collect();
    let distances = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    if a == b {
                        0.0
                    } else {
                        haversine_km(cities[a].lat, cities[a].lon, cities[b].lat, cities[b].lon)
                    }
                })
                .collect()
        })
        .collect();
    let n_obs = spec.years * 26;
    let obs_times: Vec<f64> = (1..=n_obs).map(|n| 14.0 * n as f64).collect();
    let mut data = MeaslesData {
        cities,
        distances,
        births,
        start_year: spec.start_year,
        t0: 0.0,
        obs_times,
        cases: Vec::new(),
    };
    let model = MeaslesNetwork::new(&data, &spec.params, euler_dt)?;
    let grid = build_time_grid(data.t0, &data.obs_times, 1)?;
    let sim = simulate_pomp(&model, model.params(), &grid, root.child(2))?;
    data.cases = sim.observations;
    Ok(data)
}
