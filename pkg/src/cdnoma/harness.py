"""Monte Carlo experiment driver.

A run sweeps either the bit energy or the number of users per group (the
overloading) and evaluates a set of receivers on every point. Each trial is
a fresh drop: new user angles, new channel fading and new MUSA codes. All
points of an energy sweep within one trial share that drop, which makes
curves paired across ``E_b``; an overloading sweep draws one drop per point
because the user set changes.

Receivers
---------
``scma-mpa``      SCMA message passing on each user's own stream
``scma-mfb``      SCMA with genie removal of the other users
``musa-sic``      MMSE-SIC on each user's own stream
``musa-pic``      PIC-aided receiver after ``pic_iterations`` rounds
``musa-pic:i``    same after ``i`` rounds (``i = 0`` is the selected MMSE-SIC)
``musa-mfb``      MUSA with genie removal of the other users
``zf``            unspread users, per-user slicing of the beamformer output

Random streams are derived from one root seed by ``SeedSequence`` spawn keys
``(trial, attempt, ...)`` so a trial does not depend on which worker runs it,
and a receiver's result does not depend on which other receivers were
requested.
"""

import csv
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import air as airmod
from .beamform import (
    analog_mc,
    analog_sc_auto,
    block_mask,
    digital_dl,
    digital_ul,
    effective_channels,
    freq_response,
    gain_matrices_dl,
    gain_matrices_ul,
    power_scaling_dl,
)
from .channel import build_covariances, complex_normal, received_covariance, sample_channels
from .noma import (
    generate_musa_codes,
    index_bits,
    load_scma_codebook,
    map_symbols,
    assemble_chips,
    resource_chip_power,
    unspread_codes,
)
from .phy import (
    downlink_rx,
    downlink_tx,
    extract_streams,
    noise_corr_ul,
    stream_noise_cov,
    uplink_beta,
    uplink_rx,
)
from .rx import (
    MpaConfig,
    genie_estimates,
    mmse_sic_streams,
    mpa_decode,
    nearest_symbol,
    pic_aided_decode,
    scma_mfb_posteriors,
    zf_decode,
)
from .scenario import NOISE_POWER, draw_user_angles, group_energies, scenario_to_dict

log = logging.getLogger(__name__)

SCHEMES = ("SCMA", "MUSA", "ZF")
BASE_RECEIVERS = ("scma-mpa", "scma-mfb", "musa-sic", "musa-pic", "musa-mfb", "zf")
METRICS = ("ber", "air")
LINKS = ("uplink", "downlink")
COLUMNS = ("sweep", "receiver", "metric", "mean", "stderr", "n", "clamps", "config_hash", "seed")
MIN_SYMBOLS = 1000

PROFILES = {
    "desk": {"antennas": 64, "trials": 10, "symbols": 20000},
    "paper": {"antennas": 100, "trials": 100, "symbols": 50000},
}


class ExperimentError(ValueError):
    pass


def parse_receiver(name):
    """Split a receiver name into ``(scheme, base, pic_round)``.

    ``pic_round`` is ``None`` except for ``musa-pic`` variants.
    """
    base, _, it = name.partition(":")
    if base not in BASE_RECEIVERS:
        raise ExperimentError(f"unknown receiver {name!r}; expected one of {BASE_RECEIVERS} (musa-pic:i allowed)")
    if it and base != "musa-pic":
        raise ExperimentError(f"only musa-pic takes an iteration suffix, got {name!r}")
    rnd = None
    if it:
        try:
            rnd = int(it)
        except ValueError:
            raise ExperimentError(f"bad PIC iteration in {name!r}") from None
        if rnd < 0:
            raise ExperimentError(f"negative PIC iteration in {name!r}")
    scheme = {"scma": "SCMA", "musa": "MUSA", "zf": "ZF"}[base.split("-")[0]]
    return scheme, base, rnd


@dataclass(frozen=True)
class ExperimentSpec:
    """What to simulate.

    ``eb_db`` defaults to the scenario grid. Passing ``users`` turns the run
    into an overloading sweep at a single ``E_b``; the sweep value is then
    the loading ``100 K_g / N_c`` in percent. ``symbols`` is the number of
    NOMA symbols per user per point, spread evenly over the trials.
    ``air_cancellation`` selects the MUSA estimates fed to the AIR
    estimator: ``"genie"`` removes the other users with their true symbols
    (the perfect-cancellation model the Gaussian density is built on),
    ``"pic"`` uses the soft outputs of the PIC rounds as they are.
    ``block_filters`` designs each uplink tap filter on its own analog block
    (see :func:`cdnoma.beamform.block_mask`); switch it off to use the full
    effective channel.
    """

    scenario: object
    receivers: tuple
    metrics: tuple = ("ber",)
    link: str = "uplink"
    eb_db: tuple = None
    users: tuple = None
    symbols: int = 20000
    trials: int = None
    seed: int = None
    pic_iterations: int = 4
    mpa_iterations: int = 10
    air_cancellation: str = "genie"
    power_draws: int = 500
    workers: int = 1
    max_resamples: int = 3
    block_filters: bool = True

    def __post_init__(self):
        cfg = self.scenario
        set_ = object.__setattr__
        set_(self, "receivers", tuple(self.receivers))
        set_(self, "metrics", tuple(self.metrics))
        if self.eb_db is None:
            set_(self, "eb_db", tuple(float(e) for e in cfg.eb_over_n0_db))
        else:
            set_(self, "eb_db", tuple(float(e) for e in np.atleast_1d(self.eb_db)))
        if self.users is not None:
            set_(self, "users", tuple(int(u) for u in self.users))
        if self.trials is None:
            set_(self, "trials", cfg.trials)
        if self.seed is None:
            set_(self, "seed", cfg.seed)

        if not self.receivers:
            raise ExperimentError("no receivers requested")
        parsed = [parse_receiver(r) for r in self.receivers]
        if len(set(self.receivers)) != len(self.receivers):
            raise ExperimentError("duplicate receivers")
        if not self.metrics or any(m not in METRICS for m in self.metrics):
            raise ExperimentError(f"metrics must be a non-empty subset of {METRICS}")
        if self.link not in LINKS:
            raise ExperimentError(f"link must be one of {LINKS}")
        if not self.eb_db:
            raise ExperimentError("empty E_b sweep")
        if self.users is not None:
            if not self.users:
                raise ExperimentError("empty overloading sweep")
            if len(self.eb_db) != 1:
                raise ExperimentError("an overloading sweep runs at exactly one E_b")
            if min(self.users) < 1:
                raise ExperimentError("users per group must be >= 1")
        if self.symbols < MIN_SYMBOLS:
            raise ExperimentError(f"symbol budget {self.symbols} below {MIN_SYMBOLS} per point")
        if self.trials < 1:
            raise ExperimentError("need at least one trial")
        if self.air_cancellation not in ("pic", "genie"):
            raise ExperimentError("air_cancellation must be 'pic' or 'genie'")
        if self.pic_iterations < 0:
            raise ExperimentError("pic_iterations must be >= 0")
        if self.workers < 1:
            raise ExperimentError("workers must be >= 1")
        schemes = {p[0] for p in parsed}
        if "SCMA" in schemes:
            cb = load_scma_codebook()
            for cfg_p in self.layouts():
                if any(k != cb.users for k in cfg_p.users):
                    raise ExperimentError(f"SCMA codebook serves exactly {cb.users} users per group")
        if self.link == "downlink" and any(p[1] == "musa-pic" for p in parsed):
            raise ExperimentError("the PIC-aided receiver needs every user's stream, i.e. the uplink")
        if "air" in self.metrics and self.air_cancellation == "pic" and self.pic_iterations == 0:
            if any(p[1] == "musa-pic" and p[2] is None for p in parsed):
                raise ExperimentError("PIC-based AIR needs at least one PIC round")
        if "air" in self.metrics and any(p[1] == "musa-sic" for p in parsed):
            raise ExperimentError("AIR is not defined for musa-sic; use musa-pic or musa-mfb")

    # sweep geometry

    def layouts(self):
        """Scenario of every distinct user layout in the sweep."""
        if self.users is None:
            return [self.scenario]
        return [self.scenario.with_group_layout(users=k) for k in self.users]

    def points(self):
        """``(layout index, E_b, sweep value)`` for every sweep point."""
        if self.users is None:
            return [(0, eb, eb) for eb in self.eb_db]
        nc = self.scenario.code_length
        return [(i, self.eb_db[0], 100.0 * k / nc) for i, k in enumerate(self.users)]

    @property
    def frame_symbols(self):
        return math.ceil(self.symbols / self.trials)

    @property
    def schemes(self):
        return sorted({parse_receiver(r)[0] for r in self.receivers}, key=SCHEMES.index)


def spec_hash(spec):
    """Short digest of everything that determines a run's output."""
    d = {f.name: getattr(spec, f.name) for f in fields(spec) if f.name not in ("scenario", "workers")}
    d["scenario"] = scenario_to_dict(spec.scenario)
    blob = json.dumps(d, sort_keys=True, default=list).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def apply_profile(scenario, profile):
    """Scenario plus ``(trials, symbols)`` for a named run profile."""
    if profile not in PROFILES:
        raise ExperimentError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}")
    p = PROFILES[profile]
    return scenario.replace(antennas=p["antennas"]), p["trials"], p["symbols"]


@dataclass(frozen=True)
class ResultRecord:
    sweep: float
    receiver: str
    metric: str
    mean: float
    stderr: float
    n: int
    clamps: int
    config_hash: str
    seed: int


# --- per-trial statistics ----------------------------------------------------------


@dataclass
class BitCounter:
    errors: int = 0
    bits: int = 0

    def __add__(self, other):
        return BitCounter(self.errors + other.errors, self.bits + other.bits)

    def value(self):
        return self.errors / self.bits


def _bit_errors(est, true, labels, bps):
    diff = index_bits(est, bps, labels) != index_bits(true, bps, labels)
    return BitCounter(int(np.count_nonzero(diff)), int(diff.size))


@dataclass
class _Drop:
    cov: object
    channel: object
    musa: object
    power_taps: list = field(default=None)


def _draw_drop(cfg, spec, ss):
    rng = np.random.default_rng(ss)
    cov = build_covariances(cfg, draw_user_angles(cfg, rng))
    channel = sample_channels(cov, rng)
    K = max(cfg.users)
    musa = generate_musa_codes(cfg.code_length, K, rng) if "MUSA" in spec.schemes else None
    power = None
    if spec.link == "downlink":
        # compact active taps only: (draws, n_mpc, M, K) per group
        power = []
        for F in cov.factors():
            K_g, P, M, _ = F.shape
            w = complex_normal(rng, (spec.power_draws, K_g, P, M))
            power.append(np.einsum("kpij,rkpj->rpik", F, w))
    return _Drop(cov, channel, musa, power)


def _scheme_book(scheme, cfg, drop):
    """Codebook (or code set), code length and bit labels of a scheme."""
    if scheme == "SCMA":
        cb = load_scma_codebook()
        return cb, cb.code_length, cb.bit_labels
    if scheme == "MUSA":
        return drop.musa, cfg.code_length, None
    return unspread_codes(max(cfg.users)), 1, None


def _group_book(book, K):
    if hasattr(book, "codes") and book.users != K:
        return replace(book, codes=book.codes[:K])
    return book


class _Chain:
    """Transmit/receive chain of one scheme at one point; yields per-group
    equivalent streams together with the transmitted indices."""

    def __init__(self, spec, cfg, drop, scheme, eb, rng):
        self.spec, self.cfg, self.drop, self.scheme = spec, cfg, drop, scheme
        self.book, self.nc, self.labels = _scheme_book(scheme, cfg, drop)
        self.energies = group_energies(cfg, eb, self.nc)
        self.rng = rng
        self.Ry = received_covariance(drop.cov, self.energies, NOISE_POWER)
        self.kind = "CMF" if scheme == "SCMA" else "ZF"

    def run(self):
        if self.spec.link == "uplink":
            return self._uplink()
        return self._downlink()

    def _symbols(self, n_sym):
        M = self.book.alphabet_size
        idx, chips = [], []
        for g in self.cfg.groups:
            book = _group_book(self.book, g.users)
            i = self.rng.integers(0, M, size=(g.users, n_sym))
            idx.append(i)
            chips.append(assemble_chips(map_symbols(i, book)))
        return idx, chips

    def _uplink(self):
        cfg, cov = self.cfg, self.drop.cov
        taps = self.drop.channel.taps
        S, W, betas, noise = [], [], [], []
        for g, grp in enumerate(cfg.groups):
            Sg, _, d = analog_sc_auto(cov.per_delay(g), self.Ry, grp.rf_chains)
            H_eff = effective_channels(Sg, taps[g])
            mask = block_mask(grp.delays, d, cfg.total_delays) if self.spec.block_filters else None
            Wg = digital_ul(H_eff, NOISE_POWER, self.energies[g], grp.users, self.kind, mask)
            Phi = gain_matrices_ul(Wg, H_eff)
            L = H_eff.shape[0]
            betas.append(uplink_beta(Phi[L - 1], self.energies[g], grp.users))
            R_xi = noise_corr_ul(Wg, Sg, NOISE_POWER)
            noise.append([stream_noise_cov(R_xi, m, self.nc) for m in range(grp.users)])
            S.append(Sg)
            W.append(Wg)
        n_sym = self.spec.frame_symbols + 2
        idx, chips = self._symbols(n_sym)
        r = uplink_rx(chips, taps, S, W, self.energies, NOISE_POWER, self.rng)
        keep = slice(1, n_sym - 1)  # edge symbols excluded
        out = []
        for g in range(len(cfg.groups)):
            streams = extract_streams(r[g], betas[g], self.nc, noise[g])
            for s in streams:
                s.z = s.z[keep]
            out.append((streams, idx[g][:, keep].T))
        return out

    def _downlink(self):
        cfg, cov = self.cfg, self.drop.cov
        taps = self.drop.channel.taps
        N, L = cfg.subcarriers, cfg.total_delays
        S, W, c, betas = [], [], [], []
        for g, grp in enumerate(cfg.groups):
            Sg = analog_mc(cov.group_sum(g), self.Ry, grp.rf_chains)
            Lam = freq_response(effective_channels(Sg, taps[g]), N)
            Wg = digital_dl(Lam, NOISE_POWER, self.energies[g], grp.users, self.kind)
            book = _group_book(self.book, grp.users)
            cg = power_scaling_dl(Sg, self._power_samples(g, Sg), resource_chip_power(book, N), self.energies[g])
            S.append(Sg)
            W.append(Wg)
            c.append(cg)
            betas.append(gain_matrices_dl(Lam, Wg, cg))
        n_ofdm = math.ceil(self.spec.frame_symbols * self.nc / N)
        n_sym = n_ofdm * N // self.nc
        idx, chips = self._symbols(n_sym)
        x = downlink_tx(chips, S, W, c, L - 1)
        r = downlink_rx(x, taps, L - 1, NOISE_POWER, self.rng)
        out = []
        for g, grp in enumerate(cfg.groups):
            rg = r[g].reshape(-1, grp.users)
            Rn = [NOISE_POWER * np.eye(self.nc) for _ in range(grp.users)]
            out.append((extract_streams(rg, betas[g], self.nc, Rn), idx[g].T))
        return out

    def _power_samples(self, g, Sg):
        grp = self.cfg.groups[g]
        h = self.drop.power_taps[g]  # (R, P, M, K)
        R = h.shape[0]
        eff = np.zeros((R, self.cfg.total_delays, Sg.shape[1], grp.users), dtype=complex)
        eff[:, grp.delays] = np.einsum("md,rpmk->rpdk", Sg.conj(), h)
        N = self.cfg.subcarriers
        Lam = np.fft.fft(eff.conj().transpose(0, 1, 3, 2), n=N, axis=1).reshape(R * N, grp.users, -1)
        Wd = digital_dl(Lam, NOISE_POWER, self.energies[g], grp.users, self.kind)
        return Wd.reshape(R, N, Sg.shape[1], grp.users)


# --- receivers ---------------------------------------------------------------------


def _musa_arrays(streams, codes):
    z = np.stack([s.z for s in streams])
    H = np.stack([s.spread_matrix(codes) for s in streams])
    Rn = np.stack([s.noise_cov for s in streams])
    return z, H, Rn


def _eval_musa(spec, wanted, streams, true, book, stats):
    K = len(streams)
    book = _group_book(book, K)
    alph = book.alphabet
    bps = int(math.log2(alph.size))
    z, H, Rn = _musa_arrays(streams, book.codes)
    own = H[np.arange(K), :, :, np.arange(K)]  # (K, b, Nc)
    want_ber = "ber" in spec.metrics
    want_air = "air" in spec.metrics
    genie = None

    def genie_est():
        nonlocal genie
        if genie is None:
            genie = genie_estimates(z, H, true, alph)
        return genie

    pic_rounds = {}
    for name in wanted:
        _, base, rnd = parse_receiver(name)
        if base == "musa-pic":
            pic_rounds[name] = spec.pic_iterations if rnd is None else rnd
    pic = None
    if pic_rounds:
        pic = pic_aided_decode(z, H, Rn, alph, max_iter=max(pic_rounds.values()))

    for name in wanted:
        _, base, rnd = parse_receiver(name)
        if base == "musa-sic":
            sic = pic.stream_indices if pic is not None else mmse_sic_streams(z, H, Rn, alph).indices
            dec = sic[np.arange(K), :, np.arange(K)].T
            est = None
        elif base == "musa-mfb":
            est = genie_est()
            dec = nearest_symbol(est, alph)
        else:
            i = pic_rounds[name]
            dec = pic.history[i]
            est = None
            if want_air:
                if spec.air_cancellation == "genie":
                    est = genie_est()
                elif i == 0:
                    raise ExperimentError("PIC-based AIR needs at least one PIC round")
                elif i == len(pic.history) - 1:
                    est = pic.estimates
                else:
                    est = pic_aided_decode(z, H, Rn, alph, max_iter=i).estimates
        if want_ber:
            stats[("ber", name)] = stats.get(("ber", name), BitCounter()) + _bit_errors(dec, true, None, bps)
        if want_air:
            acc = stats.get(("air", name)) or airmod.AirAccumulator(alph.size, book.code_length)
            for m in range(K):
                airmod.air_musa_update(acc, est[:, m], true[:, m], own[m], Rn[m], alph)
            stats[("air", name)] = acc


def _eval_scma(spec, wanted, streams, true, cb, stats):
    K, M = cb.users, cb.alphabet_size
    bps = int(math.log2(M))
    cfg = MpaConfig(spec.mpa_iterations)
    for name in wanted:
        _, base, _ = parse_receiver(name)
        if base == "scma-mpa":
            n = streams[0].z.shape[0]
            Z = np.concatenate([s.z for s in streams])
            G = np.concatenate([np.broadcast_to(s.gains, (n,) + s.gains.shape[1:]) for s in streams])
            NV = np.concatenate(
                [np.broadcast_to(np.real(np.diag(s.noise_cov)), (n, cb.code_length)) for s in streams]
            )
            post = mpa_decode(Z, G, NV, cb, cfg).reshape(K, n, K, M)
            own = post[np.arange(K), :, np.arange(K)]  # (K, n, M)
        else:
            own = np.stack([scma_mfb_posteriors(s, cb, true, cfg) for s in streams])
        dec = np.argmax(own, axis=-1).T
        if "ber" in spec.metrics:
            stats[("ber", name)] = stats.get(("ber", name), BitCounter()) + _bit_errors(dec, true, cb.bit_labels, bps)
        if "air" in spec.metrics:
            acc = stats.get(("air", name)) or airmod.AirAccumulator(M, cb.code_length)
            for m in range(K):
                airmod.air_scma_update(acc, own[m], true[:, m])
            stats[("air", name)] = acc


def _eval_zf(spec, wanted, streams, true, book, stats):
    alph = book.alphabet
    bps = int(math.log2(alph.size))
    K = len(streams)
    est = np.empty(true.shape, dtype=complex)
    for m, s in enumerate(streams):
        h = s.gains[:, :, m]
        _, est[:, m] = zf_decode(s.z, h, alph)
    dec = nearest_symbol(est, alph)
    for name in wanted:
        if "ber" in spec.metrics:
            stats[("ber", name)] = stats.get(("ber", name), BitCounter()) + _bit_errors(dec, true, None, bps)
        if "air" in spec.metrics:
            acc = stats.get(("air", name)) or airmod.AirAccumulator(alph.size, 1)
            for m in range(K):
                s = streams[m]
                airmod.air_musa_update(acc, est[:, m], true[:, m], s.gains[:, :, m], s.noise_cov, alph)
            stats[("air", name)] = acc


_EVAL = {"SCMA": _eval_scma, "MUSA": _eval_musa, "ZF": _eval_zf}


def _trial_once(spec, t, attempt):
    out = {}
    drops = {}
    layouts = spec.layouts()
    by_scheme = {s: [r for r in spec.receivers if parse_receiver(r)[0] == s] for s in spec.schemes}
    for p, (li, eb, _) in enumerate(spec.points()):
        cfg = layouts[li]
        if li not in drops:
            drops[li] = _draw_drop(cfg, spec, np.random.SeedSequence(spec.seed, spawn_key=(t, attempt, 0, li)))
        drop = drops[li]
        for scheme, wanted in by_scheme.items():
            ss = np.random.SeedSequence(spec.seed, spawn_key=(t, attempt, 1, p, SCHEMES.index(scheme)))
            chain = _Chain(spec, cfg, drop, scheme, eb, np.random.default_rng(ss))
            stats = {}
            for streams, true in chain.run():
                _EVAL[scheme](spec, wanted, streams, true, chain.book, stats)
            for (metric, name), v in stats.items():
                out[(p, metric, name)] = v
    return out


def run_trial(spec, t):
    """Statistics of trial ``t``: ``{(point, metric, receiver): stat}``.

    A trial that hits a numerical failure is redrawn with the next attempt
    counter, at most ``spec.max_resamples`` times; redraws are logged.
    """
    for attempt in range(spec.max_resamples + 1):
        try:
            return _trial_once(spec, t, attempt), attempt
        except np.linalg.LinAlgError as exc:
            log.warning("trial %d attempt %d failed numerically (%s); redrawing", t, attempt, exc)
    raise RuntimeError(f"trial {t} failed {spec.max_resamples + 1} times")


def _trial_task(args):
    return run_trial(*args)


def run_trials(spec):
    """Per-trial statistics in trial order, serially or over a process pool."""
    tasks = [(spec, t) for t in range(spec.trials)]
    if spec.workers == 1:
        results = []
        for a in tasks:
            results.append(run_trial(*a))
            log.info("trial %d/%d done", a[1] + 1, spec.trials)
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            results = list(pool.map(_trial_task, tasks))
    resampled = sum(a for _, a in results)
    if resampled:
        log.warning("%d trial redraws after numerical failures", resampled)
    return [r for r, _ in results]


def _mean_stderr(values):
    v = np.asarray(values, dtype=float)
    se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(np.mean(v)), se


def aggregate(spec, per_trial, metrics=None):
    """Reduce per-trial statistics to records, in sweep and receiver order.

    Means and standard errors are taken over per-trial values. AIR also
    yields an ``air_group`` record, ``K_g`` times the per-user value.
    """
    metrics = spec.metrics if metrics is None else metrics
    chash = spec_hash(spec)
    layouts = spec.layouts()
    records = []
    for p, (li, _, sweep) in enumerate(spec.points()):
        K = layouts[li].groups[0].users
        for metric in metrics:
            for name in spec.receivers:
                stats = [tr[(p, metric, name)] for tr in per_trial]
                total = stats[0]
                for s in stats[1:]:
                    total = total + s
                if metric == "ber":
                    mean, se = _mean_stderr([s.value() for s in stats])
                    records.append(ResultRecord(sweep, name, "ber", mean, se, total.bits, 0, chash, spec.seed))
                else:
                    mean, se = _mean_stderr([airmod.finalize_air(s) for s in stats])
                    records.append(ResultRecord(sweep, name, "air", mean, se, total.count, total.clamps, chash, spec.seed))
                    records.append(
                        ResultRecord(sweep, name, "air_group", K * mean, K * se, total.count, total.clamps, chash, spec.seed)
                    )
    return records


def run(spec):
    """Run every metric of ``spec`` from one set of simulated trials."""
    return aggregate(spec, run_trials(spec))


def run_ber(spec):
    return run(replace(spec, metrics=("ber",)))


def run_air(spec):
    return run(replace(spec, metrics=("air",)))


# --- persistence -------------------------------------------------------------------


def _row(rec):
    return [getattr(rec, c) for c in COLUMNS]


def format_records(records, fmt):
    """Serialise records to text in the fixed column order."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([repr(v) if isinstance(v, float) else v for v in _row(r)])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([dict(zip(COLUMNS, _row(r))) for r in records], indent=1) + "\n"
    raise ExperimentError(f"unknown output format {fmt!r}")


def emit(records, fmt, out_dir):
    """Write one file per metric (``ber.csv``, ``air.json``, ...) and return
    the paths."""
    records = list(records)
    if not records:
        raise ExperimentError("no records to write")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for metric in dict.fromkeys(r.metric for r in records):
        path = out / f"{metric}.{fmt}"
        path.write_text(format_records([r for r in records if r.metric == metric], fmt))
        paths.append(path)
    return paths


def load_records(path):
    """Parse a file written by :func:`emit`."""
    path = Path(path)
    if path.suffix == ".json":
        rows = json.loads(path.read_text())
    else:
        with path.open(newline="") as f:
            rows = list(csv.DictReader(f))
    out = []
    for d in rows:
        out.append(
            ResultRecord(
                float(d["sweep"]),
                d["receiver"],
                d["metric"],
                float(d["mean"]),
                float(d["stderr"]),
                int(d["n"]),
                int(d["clamps"]),
                d["config_hash"],
                int(d["seed"]),
            )
        )
    return out
