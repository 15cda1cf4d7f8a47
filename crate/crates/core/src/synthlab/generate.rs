use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal};

use super::config::{Adoption, DgpConfig};
use crate::coredata::{
    carry_forward_political, crude_rate, AgeCells, AgeStratifiedCounts, ElectionTable, Geography, Outcome,
    PanelDataset, PanelRow, PolicyTable, RegionId, SocialNetwork, StandardPopulation, StateCode, DEFAULT_COVARIATES,
    ELECTION_YEARS, N_AGE_GROUPS,
};
use crate::error::{Error, Result};
use crate::exposure::{self as ex, standardize, Denominator, ExposureOptions, ExposureSeries};
use crate::geo::DistanceMatrix;

// Independent random streams, so that changing one component leaves the
// draws of the others untouched.
const STREAM_GEOGRAPHY: u64 = 1;
const STREAM_POPULATION: u64 = 2;
const STREAM_NETWORK: u64 = 3;
const STREAM_FIXED_EFFECTS: u64 = 4;
const STREAM_LATENT: u64 = 5;
const STREAM_ADOPTION: u64 = 6;
const STREAM_COVARIATES: u64 = 7;
const STREAM_ELECTIONS: u64 = 8;
const STREAM_AGE: u64 = 9;
const STREAM_NOISE: u64 = 10;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

// Bounding box of the synthetic map (degrees).
const LAT_RANGE: (f64, f64) = (30.0, 47.0);
const LON_RANGE: (f64, f64) = (-120.0, -75.0);

/// Regions, their centroids, distances, first-year populations and the
/// connectedness network.
#[derive(Debug, Clone)]
pub struct SyntheticNetwork {
    pub regions: Vec<RegionId>,
    pub network: SocialNetwork,
    pub geography: Geography,
    pub distances: DistanceMatrix,
    pub populations: BTreeMap<RegionId, u64>,
}

/// Region codes: region `k` belongs to state `k mod n_states + 1`.
pub fn region_codes(cfg: &DgpConfig) -> Vec<RegionId> {
    let mut v: Vec<RegionId> = (0..cfg.n_regions)
        .map(|k| {
            let state = (k % cfg.n_states) as u32 + 1;
            let county = 2 * (k / cfg.n_states) as u32 + 1;
            RegionId::from_parts(state, county).expect("validated sizes")
        })
        .collect();
    v.sort_unstable();
    v
}

pub fn state_codes(cfg: &DgpConfig) -> Vec<StateCode> {
    (1..=cfg.n_states as u32).map(|s| StateCode::from_number(s).expect("validated sizes")).collect()
}

/// States tile the map in a grid; each region lies inside its state's cell.
fn place_regions(cfg: &DgpConfig, regions: &[RegionId]) -> Result<Geography> {
    let aspect = (LON_RANGE.1 - LON_RANGE.0) / (LAT_RANGE.1 - LAT_RANGE.0);
    let cols = ((cfg.n_states as f64 * aspect).sqrt().ceil() as usize).max(1);
    let rows = cfg.n_states.div_ceil(cols);
    let w = (LON_RANGE.1 - LON_RANGE.0) / cols as f64;
    let h = (LAT_RANGE.1 - LAT_RANGE.0) / rows as f64;
    let mut rng = stream(cfg.seed, STREAM_GEOGRAPHY);
    let mut geo = Geography::new();
    for r in regions {
        let s: usize = r.state().as_str().parse::<usize>().expect("numeric state") - 1;
        let (cx, cy) = (s % cols, s / cols);
        let lon = LON_RANGE.0 + w * (cx as f64 + rng.random_range(0.02..0.98));
        let lat = LAT_RANGE.0 + h * (cy as f64 + rng.random_range(0.02..0.98));
        geo.insert(*r, lat, lon)?;
    }
    geo.validate_for(regions)?;
    Ok(geo)
}

/// Builds a synthetic map and a connectedness network whose strength
/// decays with distance and is boosted within states.
pub fn generate_network(cfg: &DgpConfig) -> Result<SyntheticNetwork> {
    cfg.validate()?;
    let regions = region_codes(cfg);
    let geography = place_regions(cfg, &regions)?;
    let distances = DistanceMatrix::build(&geography, &regions)?;

    let mut rng = stream(cfg.seed, STREAM_POPULATION);
    let populations: BTreeMap<RegionId, u64> = regions
        .iter()
        .map(|r| {
            let p = cfg.population_median * (cfg.population_sdlog * normal(&mut rng)).exp();
            (*r, p.round().clamp(1_000.0, 1e8) as u64)
        })
        .collect();

    let n = regions.len();
    let nearest: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .min_by(|&a, &b| distances.get(i, a).total_cmp(&distances.get(i, b)))
                .expect("at least two regions")
        })
        .collect();
    let mut rng = stream(cfg.seed, STREAM_NETWORK);
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            let z = normal(&mut rng);
            let keep = u < cfg.network_density || nearest[i] == j || nearest[j] == i;
            if !keep {
                continue;
            }
            let same_state = regions[i].state() == regions[j].state();
            let decay = (-distances.get(i, j) / cfg.distance_scale_km).exp();
            let sci = 1_000.0 * decay * if same_state { 3.0 } else { 1.0 } * (0.5 * z).exp();
            pairs.push((regions[i], regions[j], sci.max(f64::MIN_POSITIVE)));
        }
    }
    let network = SocialNetwork::from_pairs(pairs)?;
    Ok(SyntheticNetwork { regions, network, geography, distances, populations })
}

/// Everything drawn for one replication.
#[derive(Debug, Clone)]
pub struct Simulated {
    pub config: DgpConfig,
    pub network: SocialNetwork,
    pub geography: Geography,
    pub distances: DistanceMatrix,
    pub panel: PanelDataset,
    pub policy: PolicyTable,
    pub never_adopted: Vec<StateCode>,
    pub elections: ElectionTable,
    pub age: AgeStratifiedCounts,
    pub standard_population: StandardPopulation,
    /// Standardized planted regressors under the names the estimator uses.
    pub exposures: Vec<ExposureSeries>,
    /// Region-years whose planted rate was negative and clipped to zero deaths.
    pub clipped: usize,
    /// Outcome per 100k before deaths were rounded, region-major.
    pub planted_rate: Vec<f64>,
}

pub fn simulate(cfg: &DgpConfig) -> Result<Simulated> {
    let net = generate_network(cfg)?;
    simulate_panel(cfg, &net)
}

fn adoption(cfg: &DgpConfig) -> (PolicyTable, Vec<StateCode>) {
    let years = cfg.years();
    let mut rng = stream(cfg.seed, STREAM_ADOPTION);
    let mut policy = PolicyTable::new();
    let mut never = Vec::new();
    for s in state_codes(cfg) {
        let rule = cfg
            .adoption_schedule
            .get(s.as_str())
            .or_else(|| cfg.adoption_schedule.get("*"))
            .copied()
            .unwrap_or(Adoption::Never);
        let first = match rule {
            Adoption::Year(y) => Some(y),
            Adoption::Never => None,
            Adoption::Random(p) => years.iter().copied().find(|_| rng.random::<f64>() < p),
        };
        match first {
            Some(y) => policy.adopt(s, y),
            None => never.push(s),
        }
    }
    (policy, never)
}

fn elections(cfg: &DgpConfig, regions: &[RegionId]) -> Result<ElectionTable> {
    let mut rng = stream(cfg.seed, STREAM_ELECTIONS);
    let state_lean: HashMap<StateCode, f64> =
        state_codes(cfg).into_iter().map(|s| (s, 0.1 * normal(&mut rng))).collect();
    let mut table = ElectionTable::new();
    for r in regions {
        let lean = 0.1 + state_lean[&r.state()] + 0.15 * normal(&mut rng);
        for y in ELECTION_YEARS {
            let share = lean + 0.05 * normal(&mut rng);
            table.insert(*r, y, (share > 0.0) as u8)?;
        }
    }
    Ok(table)
}

/// Relative risk by five-year age group.
const AGE_RISK: [f64; N_AGE_GROUPS] =
    [0.0, 0.02, 0.5, 1.5, 2.1, 2.1, 2.0, 2.1, 2.3, 2.4, 2.5, 2.4, 2.1, 1.8, 1.8, 1.9, 2.0, 2.0];

/// Splits `total` into integer parts proportional to `shares` (largest remainder).
fn apportion(total: u64, shares: &[f64; N_AGE_GROUPS]) -> [u64; N_AGE_GROUPS] {
    let raw: Vec<f64> = shares.iter().map(|s| s * total as f64).collect();
    let mut out = [0u64; N_AGE_GROUPS];
    for (o, r) in out.iter_mut().zip(&raw) {
        *o = r.floor() as u64;
    }
    let mut rest = total - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..N_AGE_GROUPS).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    for k in order {
        if rest == 0 {
            break;
        }
        out[k] += 1;
        rest -= 1;
    }
    out
}

/// Draws a multinomial split of `n` by sequential binomials.
fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64; N_AGE_GROUPS]) -> [u64; N_AGE_GROUPS] {
    let mut out = [0u64; N_AGE_GROUPS];
    let mut left = n;
    let mut mass: f64 = probs.iter().sum();
    for a in 0..N_AGE_GROUPS {
        if left == 0 {
            break;
        }
        if a == N_AGE_GROUPS - 1 || mass <= 0.0 {
            out[a] = left;
            break;
        }
        let p = (probs[a] / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, p).expect("valid binomial").sample(rng);
        out[a] = k;
        left -= k;
        mass -= probs[a];
    }
    out
}

struct Covariates {
    /// `DEFAULT_COVARIATES` order, region-major then year.
    values: Vec<Vec<f64>>,
    age_shares: Vec<[f64; N_AGE_GROUPS]>,
}

fn draw_covariates(
    cfg: &DgpConfig,
    regions: &[RegionId],
    pops: &[Vec<u64>],
    leaning: &HashMap<(RegionId, i32), f64>,
) -> Covariates {
    let years = cfg.years();
    let mut rng = stream(cfg.seed, STREAM_COVARIATES);
    let std_weights = StandardPopulation::us_2000();
    let beta = |a: f64, b: f64| Beta::new(a, b).expect("valid beta");
    let (b_asian, b_black, b_other, b_hisp, b_eng) =
        (beta(1.2, 60.0), beta(0.6, 6.0), beta(2.0, 60.0), beta(0.9, 9.0), beta(1.0, 60.0));
    let cycle: Vec<f64> = (0..years.len()).map(|t| 3.0 * (-(t as f64) / 3.0).exp() - 1.0).collect();
    let mut values = Vec::with_capacity(regions.len() * years.len());
    let mut age_shares = Vec::with_capacity(regions.len());
    for (ri, r) in regions.iter().enumerate() {
        let tilt = 0.3 * normal(&mut rng);
        let mut shares = [0.0; N_AGE_GROUPS];
        for (a, s) in shares.iter_mut().enumerate() {
            let centered = (a as f64 - 8.5) / 8.5;
            *s = std_weights.weights()[a] * (tilt * centered + 0.1 * normal(&mut rng)).exp();
        }
        let total: f64 = shares.iter().sum();
        shares.iter_mut().for_each(|s| *s /= total);
        let pct_0_17 = 100.0 * (shares[0] + shares[1] + shares[2] + 0.6 * shares[3]);
        let pct_18_44 = 100.0 * (0.4 * shares[3] + shares[4..9].iter().sum::<f64>());
        let pct_45_64 = 100.0 * shares[9..13].iter().sum::<f64>();
        age_shares.push(shares);

        let area = pops[ri][0] as f64 / (4.0 + 1.2 * normal(&mut rng)).exp();
        let asian = 100.0 * b_asian.sample(&mut rng);
        let black = 100.0 * b_black.sample(&mut rng);
        let other = 100.0 * b_other.sample(&mut rng);
        let hisp = 100.0 * b_hisp.sample(&mut rng);
        let income = 52_000.0 * (0.25 * normal(&mut rng)).exp();
        let english = 100.0 * b_eng.sample(&mut rng);
        let unemp = 5.5 + 1.2 * normal(&mut rng);
        let less_hs = 13.0 + 4.0 * normal(&mut rng);
        for (t, y) in years.iter().enumerate() {
            let tf = t as f64;
            let mut jitter = |sd: f64| sd * normal(&mut rng);
            let row = vec![
                pops[ri][t] as f64 / area,
                (pct_0_17 - 0.1 * tf + jitter(0.2)).clamp(0.0, 100.0),
                (pct_18_44 + jitter(0.2)).clamp(0.0, 100.0),
                (pct_45_64 + 0.05 * tf + jitter(0.2)).clamp(0.0, 100.0),
                (asian + 0.05 * tf + jitter(0.05)).clamp(0.0, 100.0),
                (black + jitter(0.1)).clamp(0.0, 100.0),
                (other + jitter(0.05)).clamp(0.0, 100.0),
                (hisp + 0.2 * tf + jitter(0.1)).clamp(0.0, 100.0),
                income * 1.025f64.powf(tf) * jitter(0.02).exp(),
                (english + jitter(0.05)).clamp(0.0, 100.0),
                (unemp + cycle[t] + jitter(0.4)).clamp(0.5, 30.0),
                (less_hs - 0.2 * tf + jitter(0.3)).clamp(1.0, 60.0),
                leaning[&(*r, *y)],
            ];
            values.push(row);
        }
    }
    Covariates { values, age_shares }
}

fn standardized_or_flat(series: ExposureSeries) -> Result<(ExposureSeries, Vec<f64>)> {
    match standardize(&series) {
        Ok(z) => {
            let v = z.values().to_vec();
            Ok((z, v))
        }
        Err(Error::ZeroVariance(name)) => {
            log::warn!("{name} does not vary in this draw; its planted effect is inert");
            let n = series.values().len();
            Ok((series, vec![0.0; n]))
        }
        Err(e) => Err(e),
    }
}

/// Draws a panel whose crude rate is a planted linear combination of
/// standardized exposures, covariates and fixed effects plus noise.
///
/// Proximity exposures are built from latent alter rates rather than the
/// realised outcome, so they are exogenous unless `contagion_rho` is set.
pub fn simulate_panel(cfg: &DgpConfig, net: &SyntheticNetwork) -> Result<Simulated> {
    cfg.validate()?;
    let years = cfg.years();
    let regions = net.regions.clone();
    let (n, t_len) = (regions.len(), years.len());

    let mut rng = stream(cfg.seed, STREAM_POPULATION ^ 0x100);
    let pops: Vec<Vec<u64>> = regions
        .iter()
        .map(|r| {
            let p0 = net.populations[r] as f64;
            let growth = 0.004 + 0.004 * normal(&mut rng);
            (0..t_len).map(|t| (p0 * (1.0 + growth).powi(t as i32)).round().max(1_000.0) as u64).collect()
        })
        .collect();

    let mut rng = stream(cfg.seed, STREAM_FIXED_EFFECTS);
    let mu: Vec<f64> = (0..n).map(|_| cfg.fe_scales.region * normal(&mut rng)).collect();
    let phi: Vec<f64> = (0..t_len).map(|_| cfg.fe_scales.year * normal(&mut rng)).collect();
    let eta: Vec<Vec<f64>> =
        (0..cfg.n_states).map(|_| (0..t_len).map(|_| cfg.fe_scales.state_year * normal(&mut rng)).collect()).collect();

    let mut rng = stream(cfg.seed, STREAM_LATENT);
    let mu_b: Vec<f64> = (0..n).map(|_| cfg.latent_sd * normal(&mut rng)).collect();
    let phi_b: Vec<f64> = (0..t_len).map(|_| normal(&mut rng)).collect();
    let mut latent_rows = Vec::with_capacity(n * t_len);
    for (ri, r) in regions.iter().enumerate() {
        for (t, y) in years.iter().enumerate() {
            let b = cfg.base_rate + mu_b[ri] + phi_b[t] + cfg.latent_sd * normal(&mut rng);
            latent_rows.push(PanelRow {
                region: *r,
                year: *y,
                deaths: 0,
                population: pops[ri][t],
                crude_rate: b,
                age_adjusted_rate: None,
                covariates: vec![],
                erpo: 0,
            });
        }
    }
    let latent = PanelDataset::from_rows(vec![], latent_rows, true)?.0;

    let (policy, never_adopted) = adoption(cfg);
    let opts = ExposureOptions::default();
    let (s_b, zs) = standardized_or_flat(ex::deaths_in_social_proximity(&latent, &net.network, Outcome::Crude, opts)?)?;
    let (d_b, zd) = standardized_or_flat(ex::deaths_in_spatial_proximity(&latent, &net.distances, Outcome::Crude)?)?;
    let (e_soc, ze) = standardized_or_flat(ex::erpo_social_exposure(
        &net.network,
        &policy,
        &regions,
        &years,
        Denominator::ExcludeSelf,
    )?)?;
    let (e_sp, zp) = standardized_or_flat(ex::erpo_spatial_exposure(&net.distances, &policy, &regions, &years)?)?;

    let elections = elections(cfg, &regions)?;
    let leaning = carry_forward_political(&elections, &regions, &years, true)?.values;
    let covs = draw_covariates(cfg, &regions, &pops, &leaning);
    let effects: Vec<f64> =
        DEFAULT_COVARIATES.iter().map(|c| cfg.covariate_effects.get(*c).copied().unwrap_or(0.0)).collect();

    let mut rng = stream(cfg.seed, STREAM_NOISE);
    let mut y = vec![0.0; n * t_len];
    for ri in 0..n {
        let s = regions[ri].state().as_str().parse::<usize>().expect("numeric state") - 1;
        for t in 0..t_len {
            let k = ri * t_len + t;
            let active = policy.is_active(regions[ri].state(), years[t]) as u8 as f64;
            let xb: f64 = covs.values[k].iter().zip(&effects).map(|(x, b)| x * b).sum();
            y[k] = cfg.base_rate
                + mu[ri]
                + phi[t]
                + eta[s][t]
                + cfg.true_zeta1 * zs[k]
                + cfg.true_zeta2 * zd[k]
                + cfg.true_psi * active
                + cfg.true_delta1 * ze[k]
                + cfg.true_delta2 * zp[k]
                + xb
                + cfg.noise_sd * normal(&mut rng);
        }
    }
    if cfg.contagion_rho != 0.0 {
        apply_contagion(cfg.contagion_rho, net, &regions, t_len, &mut y)?;
    }

    let mut rng = stream(cfg.seed, STREAM_AGE);
    let mut rows = Vec::with_capacity(n * t_len);
    let mut age = AgeStratifiedCounts::new();
    let mut clipped = 0;
    for (ri, r) in regions.iter().enumerate() {
        let shares = &covs.age_shares[ri];
        for (t, yr) in years.iter().enumerate() {
            let k = ri * t_len + t;
            let pop = pops[ri][t];
            if y[k] < 0.0 {
                clipped += 1;
            }
            let deaths = (y[k].max(0.0) * pop as f64 / 1e5).round() as u64;
            let population = apportion(pop, shares);
            let mut probs = [0.0; N_AGE_GROUPS];
            for a in 0..N_AGE_GROUPS {
                probs[a] = population[a] as f64 * AGE_RISK[a];
            }
            let d = multinomial(&mut rng, deaths, &probs);
            age.insert(*r, *yr, AgeCells { deaths: d, population });
            rows.push(PanelRow {
                region: *r,
                year: *yr,
                deaths,
                population: pop,
                crude_rate: crude_rate(deaths, pop)?,
                age_adjusted_rate: None,
                covariates: covs.values[k].clone(),
                erpo: policy.is_active(r.state(), *yr) as u8,
            });
        }
    }
    if clipped > 0 {
        log::warn!("{clipped} planted rates were negative and produced zero deaths");
    }
    let names = DEFAULT_COVARIATES.iter().map(|s| s.to_string()).collect();
    let panel = PanelDataset::from_rows(names, rows, true)?.0;

    Ok(Simulated {
        config: cfg.clone(),
        network: net.network.clone(),
        geography: net.geography.clone(),
        distances: net.distances.clone(),
        panel,
        policy,
        never_adopted,
        elections,
        age,
        standard_population: StandardPopulation::us_2000(),
        exposures: vec![s_b, d_b, e_soc, e_sp],
        clipped,
        planted_rate: y,
    })
}

/// Solves `y = c + rho W y` year by year, with `W` the social weights.
fn apply_contagion(rho: f64, net: &SyntheticNetwork, regions: &[RegionId], t_len: usize, y: &mut [f64]) -> Result<()> {
    let pops: Vec<(RegionId, f64)> = regions.iter().map(|r| (*r, net.populations[r] as f64)).collect();
    let w: Vec<Vec<f64>> =
        regions.iter().map(|r| ex::social_weights(&net.network, &pops, *r)).collect::<Result<_>>()?;
    let n = regions.len();
    for t in 0..t_len {
        let c: Vec<f64> = (0..n).map(|i| y[i * t_len + t]).collect();
        let mut cur = c.clone();
        for _ in 0..10_000 {
            let next: Vec<f64> =
                (0..n).map(|i| c[i] + rho * w[i].iter().zip(&cur).map(|(a, b)| a * b).sum::<f64>()).collect();
            let delta = next.iter().zip(&cur).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            cur = next;
            if delta < 1e-12 * cur.iter().fold(1.0f64, |m, v| m.max(v.abs())) {
                break;
            }
        }
        for i in 0..n {
            y[i * t_len + t] = cur[i];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DgpConfig {
        DgpConfig { n_regions: 30, n_states: 5, n_years: 4, seed: 11, ..Default::default() }
    }

    #[test]
    fn density_one_is_complete() {
        let cfg = DgpConfig { network_density: 1.0, ..small() };
        let g = generate_network(&cfg).unwrap();
        let n = g.regions.len();
        assert_eq!(g.network.n_entries(), n * (n - 1));
        for i in 0..n {
            assert!(g.network.neighbors(i).iter().all(|(j, s)| *j as usize != i && *s > 0.0));
        }
    }

    #[test]
    fn same_seed_same_network() {
        let a = generate_network(&small()).unwrap();
        let b = generate_network(&small()).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.geography, b.geography);
        let c = generate_network(&small().with_seed(12)).unwrap();
        assert_ne!(a.network, c.network);
    }

    #[test]
    fn density_is_roughly_honoured() {
        let cfg = DgpConfig { n_regions: 80, network_density: 0.3, ..small() };
        let g = generate_network(&cfg).unwrap();
        let share = g.network.n_entries() as f64 / (80.0 * 79.0);
        assert!((share - 0.3).abs() < 0.05, "{share}");
    }

    #[test]
    fn connectedness_decays_with_distance() {
        let cfg = DgpConfig { n_regions: 100, n_states: 10, network_density: 1.0, ..small() };
        let g = generate_network(&cfg).unwrap();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..g.regions.len() {
            for &(j, s) in g.network.neighbors(i) {
                xs.push(-g.distances.get(i, j as usize));
                ys.push(s.ln());
            }
        }
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        assert!(cov > 0.0);
    }

    #[test]
    fn simulate_is_deterministic_and_consistent() {
        let a = simulate(&small()).unwrap();
        let b = simulate(&small()).unwrap();
        assert_eq!(a.panel, b.panel);
        assert_eq!(a.exposures, b.exposures);
        assert_eq!(a.panel.len(), 30 * 4);
        for row in a.panel.rows() {
            let cells = a.age.get(row.region, row.year).unwrap();
            assert_eq!(cells.total_deaths(), row.deaths);
            assert_eq!(cells.population.iter().sum::<u64>(), row.population);
            assert_eq!(row.erpo, a.policy.is_active(row.region.state(), row.year) as u8);
        }
        for s in &a.exposures {
            assert!(s.covers(&a.panel));
        }
    }

    #[test]
    fn adoption_schedule_is_followed() {
        let mut cfg = small();
        cfg.adoption_schedule.clear();
        cfg.adoption_schedule.insert("02".into(), Adoption::Year(2011));
        cfg.adoption_schedule.insert("*".into(), Adoption::Never);
        let sim = simulate(&cfg).unwrap();
        assert_eq!(sim.policy.iter().collect::<Vec<_>>(), vec![(StateCode::parse("02").unwrap(), 2011)]);
        assert_eq!(sim.never_adopted.len(), 4);
    }

    #[test]
    fn apportion_preserves_total() {
        let shares = StandardPopulation::us_2000().weights().to_owned();
        for total in [0u64, 1, 17, 1_000, 123_457] {
            assert_eq!(apportion(total, &shares).iter().sum::<u64>(), total);
        }
    }

    #[test]
    fn contagion_mode_runs() {
        let cfg = DgpConfig { contagion_rho: 0.3, ..small() };
        let a = simulate(&cfg).unwrap();
        let b = simulate(&small()).unwrap();
        assert_ne!(a.panel, b.panel);
    }
}
