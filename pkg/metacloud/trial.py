import logging
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import artifacts
from .cloud_lab import (combined_spectral_check, coordinatewise_maxima, exponent_link_check, extract_high_risk,
                        generate_cloud, intensity_report, onto_set_report, poisson_dispersion,
                        sample_exceedances, spectral_weights)
from .perturbations import duality_report, marginal_tail_ratio_check
from .partitions import regularity_report
from .scenarios import build_scenario, heavy_scale, light_scale
from .utils import UnsupportedError

# sub-seed slots drawn from the run seed
SLOTS = ('x_cloud', 'z_cloud', 'maxima', 'dispersion', 'link', 'high_risk', 'spectral', 'svg')


@dataclass(frozen=True)
class Gate:
    name: str
    value: float
    threshold: str
    passed: bool
    strict: bool = True

    def __str__(self):
        verdict = "pass" if self.passed else ("FAIL" if self.strict else "miss (advisory)")
        return f"{self.name:<26} {self.value:>12.5g}  {self.threshold:<22} {verdict}"


class Trial:
    """
    One (config, seed) run: builds the scenario, runs the requested
    diagnostics, writes their artifacts and collects gate outcomes.
    """
    logger = logging.getLogger(__name__)
    logger.addHandler(logging.NullHandler())

    def __init__(self, config, seed, output_dir=None, threads=None):
        self.config = config
        self.seed = int(seed)
        self.output_dir = output_dir or config.output_dir
        self.threads = threads
        self.gates = []
        self.files = []
        self.status = 'pending'
        self.wall_time = 0.0
        self.scenario = None
        self.high_risk = None
        self._clouds = {}
        states = np.random.SeedSequence(self.seed).generate_state(len(SLOTS))
        self.subseeds = {k: int(v) for k, v in zip(SLOTS, states)}

    def __repr__(self):
        passed = sum(g.passed for g in self.gates)
        return f"Trial({self.config.name}, seed={self.seed}, status={self.status}, gates {passed}/{len(self.gates)})"

    @property
    def strict_failures(self):
        return [g for g in self.gates if g.strict and not g.passed]

    def path(self, suffix):
        return os.path.join(self.output_dir, f"{self.config.name}_seed{self.seed}_{suffix}")

    def gate(self, name, value, threshold, passed, strict=True):
        g = Gate(name, float(value), threshold, bool(passed), strict)
        self.gates.append(g)
        if not g.passed:
            log = self.logger.error if strict else self.logger.warning
            log(f"{self.config.name} seed {self.seed}: gate {g}")
        return g

    def write(self, header, rows, suffix):
        self.files.append(artifacts.write_csv(self.path(suffix), header, rows))

    def run(self):
        """
        :return: self, with gates, files, status and wall_time filled in
        """
        start = time.perf_counter()
        os.makedirs(self.output_dir, exist_ok=True)
        self.status = 'running'
        try:
            self.scenario = build_scenario(self.config)
            for name in self.config.diagnostics:
                self.logger.info(f"{self.config.name} seed {self.seed}: {name}")
                getattr(self, f"diagnose_{name}")()
        except Exception:
            self.status = 'error'
            raise
        finally:
            self.wall_time = time.perf_counter() - start
        self.status = 'failed' if self.strict_failures else 'passed'
        return self

    ##########
    # Clouds
    def x_scale(self, n=None):
        return light_scale(self.scenario.light, n or self.config.n, self.config.scaling)

    def z_scale(self, n=None):
        return heavy_scale(self.scenario.heavy, n or self.config.n)

    def x_cloud(self):
        if 'x' not in self._clouds:
            self._clouds['x'] = generate_cloud(self.scenario.x_model, self.config.n, self.x_scale(),
                                               self.subseeds['x_cloud'], threads=self.threads)
        return self._clouds['x']

    def z_cloud(self):
        if not self.scenario.has_z:
            raise UnsupportedError(f"scenario '{self.config.scenario}' has no z-space model")
        if 'z' not in self._clouds:
            self._clouds['z'] = generate_cloud(self.scenario.z_model, self.config.n, self.z_scale(),
                                               self.subseeds['z_cloud'], threads=self.threads)
        return self._clouds['z']

    ##########
    # Diagnostics
    def diagnose_onto_set(self):
        cfg = self.config
        report = onto_set_report(self.x_cloud(), self.scenario.target, cfg.eps_grid, cfg.n_directions,
                                 cfg.gate_eps, cfg.max_outside, interior=cfg.onto_interior)
        self.write(report.HEADER, report.rows(), 'onto_set.csv')
        outside, cover = report.at(cfg.gate_eps)
        self.gate('outside_frac', outside, f"<= {cfg.max_outside:g} at eps={cfg.gate_eps:g}",
                  outside <= cfg.max_outside)
        self.gate('min_coverage', cover, f">= 1 at eps={cfg.gate_eps:g}", cover >= 1)
        return report

    def diagnose_svg(self):
        scen = self.scenario
        if scen.partitions:
            P = scen.partitions['x']
            self.files.append(artifacts.render_regions(P, self.path('regions.svg'),
                                                       title=f"{self.config.name}: C/D/O regions"))
            return
        overlays = scen.target.overlays() if scen.target is not None else []
        self.files.append(artifacts.render_svg(self.x_cloud().points, self.path('cloud.svg'), overlays,
                                               title=f"{self.config.name}, n={self.config.n}",
                                               seed=self.subseeds['svg']))

    def diagnose_dump(self):
        self.files.append(artifacts.dump_cloud(self.x_cloud().points,
                                               os.path.join(self.output_dir, f"{self.config.name}_seed{self.seed}.bin")))

    def diagnose_intensity(self):
        if self.scenario.density is None:
            raise UnsupportedError(f"scenario '{self.config.scenario}' has no homothetic z-density")
        report = intensity_report(self.z_cloud(), self.scenario.density, self.config.n, self.z_scale())
        self.write(report.HEADER, report.rows(), 'intensity.csv')
        self.gate('intensity_chi2_p', report.p_value, "> 0.01", report.passed)
        return report

    def diagnose_maxima(self):
        cfg = self.config
        scen = self.scenario
        report = coordinatewise_maxima(scen.z_model, scen.meta, cfg.maxima_n, cfg.maxima_reps,
                                       self.subseeds['maxima'], self.z_scale(cfg.maxima_n), light=scen.light,
                                       threads=self.threads)
        rows = [(j, report.frechet_p[j], report.frechet_index[j], report.gumbel_p[j])
                for j in range(len(report.frechet_p))]
        self.write(("axis", "frechet_p", "frechet_index", "gumbel_p"), rows, 'maxima.csv')
        self.gate('maxima_commute', report.commutes, "== 1", report.commutes)
        self.gate('maxima_ranks_equal', report.ranks_equal, "== 1", report.ranks_equal)
        self.gate('frechet_ks_p', min(report.frechet_p), "> 0.01", min(report.frechet_p) > 0.01)
        self.gate('gumbel_ks_p', min(report.gumbel_p), "> 0.01", min(report.gumbel_p) > 0.01)
        return report

    def diagnose_tail_ratio(self):
        cloud = self.z_cloud()
        rows = marginal_tail_ratio_check(None, self.scenario.heavy, self.config.tail_levels,
                                         points=cloud.points * cloud.scale)
        self.write(("axis", "level", "threshold", "count", "ratio", "stderr"),
                   [(r.axis, r.level, r.threshold, r.count, r.ratio, r.stderr) for r in rows], 'tail_ratio.csv')
        worst = max(rows, key=lambda r: abs(math.log(r.ratio)) if r.ratio > 0 else math.inf)
        self.gate('tail_ratio', worst.ratio, "in [0.8, 1.25]", 0.8 <= worst.ratio <= 1.25)
        return rows

    def diagnose_vertex(self):
        pts = self.x_cloud().points
        e = np.ones(pts.shape[1])
        hits = int(np.count_nonzero(np.linalg.norm(pts - e, axis=1) <= self.config.vertex_radius))
        self.gate('vertex_hits', hits, f">= 1 within {self.config.vertex_radius:g}", hits >= 1, strict=False)
        return hits

    def diagnose_duality(self):
        P = self.scenario.partitions
        if not P:
            raise UnsupportedError(f"scenario '{self.config.scenario}' has no partitions")
        last = min(P['z'].n_rings, P['x'].n_rings)
        report = duality_report(P['z'], P['x'], (min(P['z'].n0, last), last))
        self.write(("n", "z_ratio", "x_ratio"), list(zip(report.ns, report.z_ratio, report.x_ratio)),
                   'duality.csv')
        self.gate('duality_z_shrinks', report.z_decreasing, "== 1", report.z_decreasing)
        self.gate('duality_x_grows', report.x_increasing, "== 1", report.x_increasing)
        return report

    def diagnose_regularity(self):
        P = self.scenario.partitions
        if not P:
            raise UnsupportedError(f"scenario '{self.config.scenario}' has no partitions")
        rows = []
        for space in ('z', 'x'):
            rep = regularity_report(P[space])
            rows += [(space, n, r, dl) for n, r, dl in zip(rep.ns, rep.radius_ratio, rep.delta_rel)]
            self.gate(f'regular_{space}', rep.regular, "== 1", rep.regular, strict=False)
        self.write(("space", "n", "radius_ratio", "delta_rel"), rows, 'regularity.csv')
        return rows

    def diagnose_high_risk(self):
        cfg = self.config
        scen = self.scenario
        t = float(scen.light.tail_quantile(math.log(cfg.high_risk_level)))
        rng = np.random.default_rng(self.subseeds['high_risk'])
        pts = sample_exceedances(scen.x_model, t, cfg.exceedances, rng)
        hr = extract_high_risk(pts, t, scen.light, cfg.min_exceedances)
        self.high_risk = hr
        if cfg.scenario == 'three_density':
            p0, se0 = hr.mass_near(0.0, 0.05)
            self.write(("quantity", "value", "stderr"), [("t", t, 0.0), ("mass_u0", p0, se0)], 'high_risk.csv')
            self.gate('mass_u0', p0, "2/3 +- 5 se", abs(p0 - 2.0 / 3.0) <= 5.0 * se0, strict=False)
            return hr
        pm, sm = hr.mass_near(-1.0, cfg.high_risk_window, drift_corrected=True)
        pp, sp = hr.mass_near(1.0, cfg.high_risk_window, drift_corrected=True)
        ks = hr.ks_exponential()
        self.write(("quantity", "value", "stderr"),
                   [("t", t, 0.0), ("a_t", hr.a, 0.0), ("mass_minus", pm, sm), ("mass_plus", pp, sp),
                    ("v_ks_p", ks, 0.0)], 'high_risk.csv')
        self.gate('v_exponential_ks_p', ks, "> 0.01", ks > 0.01)
        self.gate('mass_minus', pm, "0.5 +- 3 se", abs(pm - 0.5) <= 3.0 * sm)
        self.gate('mass_plus', pp, "0.5 +- 3 se", abs(pp - 0.5) <= 3.0 * sp)
        return hr

    def diagnose_spectral(self):
        cfg = self.config
        scen = self.scenario
        t = float(scen.heavy.tail_quantile(math.log(cfg.high_risk_level)))
        rng = np.random.default_rng(self.subseeds['spectral'])
        pts = sample_exceedances(scen.z_model, t, cfg.exceedances, rng)
        sw = spectral_weights(pts, t, cfg.spectral_delta)
        self.write(sw.HEADER, sw.rows(), 'spectral.csv')
        if self.high_risk is not None:
            comb = combined_spectral_check(self.high_risk, sw, cfg.high_risk_window)
            self.gate('spectral_sum', comb.total, ">= 1 - 3 se", comb.passed)
        return sw

    def diagnose_dispersion(self):
        cfg = self.config
        counts, index = poisson_dispersion(self.scenario.z_model, cfg.n, self.z_scale(), tuple(cfg.annulus),
                                           cfg.dispersion_reps, self.subseeds['dispersion'], threads=self.threads)
        self.write(("rep", "count"), list(enumerate(counts.tolist())), 'dispersion.csv')
        self.gate('dispersion_index', index, "in [0.85, 1.15]", 0.85 <= index <= 1.15)
        return index

    def diagnose_link(self):
        cfg = self.config
        scen = self.scenario
        check = exponent_link_check(scen.z_model, scen.meta, cfg.n, cfg.link_level, cfg.lam,
                                    self.subseeds['link'], threads=self.threads)
        self.write(("axis", "ks_p", "z_count", "x_count"),
                   [(j, p, c[0], c[1]) for j, (p, c) in enumerate(zip(check.p_values, check.counts))], 'link.csv')
        self.gate('exponent_link_ks_p', min(check.p_values), "> 0.01", check.passed)
        return check
