#!/usr/bin/env python3
"""
CodeFoundry - Metrics Module
Token economics (break-even, compression, TCO), output entropy, latency
percentiles and reliability counters.

Conventions: entropy is in bits (log base 2); percentiles are nearest-rank;
jitter is P99 - P50; break-even is returned as the exact real value.
"""

import logging
import math
import os
import platform
import threading
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import psutil
import yaml

from .errors import (
    DivisionByZero,
    EmptyRunSet,
    InsufficientSamples,
    LibraryError,
    NoBreakEven,
)
from .resources import get_data_path

LOG = logging.getLogger("CodeFoundry.metrics")

METRICS_FORMAT_VERSION = 1
STRATEGIES = ("direct_llm", "langchain_style", "autogen_style", "compiled")
RUNTIME_STRATEGIES = STRATEGIES[:3]
COMPILED = "compiled"
MIN_LATENCY_SAMPLES = 100


# ---------------------------------------------------------------------------
# Token ledger
# ---------------------------------------------------------------------------


@dataclass
class TokenLedger:
    """
    Generation tokens plus per-strategy runtime tokens.

    `runtime_tokens_per_tx` holds declared per-transaction figures (e.g. a
    published comparison); `runtime_tokens` and `transactions` accumulate
    observed usage. Declared figures win when both exist.
    """

    gen_input_tokens: int = 0
    gen_output_tokens: int = 0
    runtime_tokens_per_tx: Dict[str, int] = field(default_factory=dict)
    runtime_tokens: Dict[str, int] = field(default_factory=dict)
    transactions: Dict[str, int] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        counts = [self.gen_input_tokens, self.gen_output_tokens]
        counts += list(self.runtime_tokens_per_tx.values())
        counts += list(self.runtime_tokens.values()) + list(self.transactions.values())
        if any(count < 0 for count in counts):
            raise ValueError("token counts must be >= 0")

    @property
    def gen_tokens_compiled(self) -> int:
        return self.gen_input_tokens + self.gen_output_tokens

    def record_generation(self, input_tokens: int, output_tokens: int) -> None:
        with self._lock:
            self.gen_input_tokens += input_tokens
            self.gen_output_tokens += output_tokens

    def record_runtime(self, strategy: str, tokens: int) -> None:
        """Tokens spent inside a transaction (bounded invocations)"""
        with self._lock:
            self.runtime_tokens[strategy] = self.runtime_tokens.get(strategy, 0) + tokens

    def record_transaction(self, strategy: str, tokens: int = 0) -> None:
        with self._lock:
            self.transactions[strategy] = self.transactions.get(strategy, 0) + 1
            if tokens:
                self.runtime_tokens[strategy] = self.runtime_tokens.get(strategy, 0) + tokens

    def per_tx(self, strategy: str) -> float:
        if strategy in self.runtime_tokens_per_tx:
            return float(self.runtime_tokens_per_tx[strategy])
        count = self.transactions.get(strategy, 0)
        if count == 0:
            return 0.0
        return self.runtime_tokens.get(strategy, 0) / count

    def merge(self, other: "TokenLedger") -> "TokenLedger":
        """Combine two ledgers; conflicting declared per-tx figures are an error"""
        declared = dict(self.runtime_tokens_per_tx)
        for strategy, value in other.runtime_tokens_per_tx.items():
            if strategy in declared and declared[strategy] != value:
                raise ValueError(f"conflicting per-tx declarations for {strategy}")
            declared[strategy] = value
        return TokenLedger(
            gen_input_tokens=self.gen_input_tokens + other.gen_input_tokens,
            gen_output_tokens=self.gen_output_tokens + other.gen_output_tokens,
            runtime_tokens_per_tx=declared,
            runtime_tokens=_sum_maps(self.runtime_tokens, other.runtime_tokens),
            transactions=_sum_maps(self.transactions, other.transactions),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": METRICS_FORMAT_VERSION,
            "generation": {
                "input_tokens": self.gen_input_tokens,
                "output_tokens": self.gen_output_tokens,
            },
            "runtime_tokens_per_tx": dict(self.runtime_tokens_per_tx),
            "runtime_tokens": dict(self.runtime_tokens),
            "transactions": dict(self.transactions),
        }


def _sum_maps(left: Mapping[str, int], right: Mapping[str, int]) -> Dict[str, int]:
    return {key: left.get(key, 0) + right.get(key, 0) for key in sorted(set(left) | set(right))}


@dataclass(frozen=True)
class PricingModel:
    input_per_million: float
    output_per_million: float
    monthly_infrastructure: Mapping[str, float] = field(default_factory=dict)
    inference_per_month: Mapping[str, float] = field(default_factory=dict)
    transactions_per_month: int = 1_000_000

    def __post_init__(self):
        prices = [self.input_per_million, self.output_per_million]
        prices += list(self.monthly_infrastructure.values())
        prices += list(self.inference_per_month.values())
        if any(price < 0 for price in prices):
            raise ValueError("prices must be >= 0")

    def token_cost(self, input_tokens: int, output_tokens: int) -> float:
        return (
            input_tokens * self.input_per_million + output_tokens * self.output_per_million
        ) / 1_000_000


# ---------------------------------------------------------------------------
# Economics
# ---------------------------------------------------------------------------


def break_even(gen_tokens: float, runtime_per_tx: float, compiled_per_tx: float = 0) -> float:
    """
    Transactions after which one-time generation is amortized:
    n* = gen_tokens / (runtime_per_tx - compiled_per_tx)

    Raises:
        NoBreakEven: compiled never amortizes (denominator <= 0)
    """
    gap = runtime_per_tx - compiled_per_tx
    if gap <= 0:
        raise NoBreakEven(
            "compiled strategy never amortizes",
            runtime_per_tx=runtime_per_tx,
            compiled_per_tx=compiled_per_tx,
        )
    return gen_tokens / gap


def compression_ratio(ledger: TokenLedger, n: int, strategy: str = "direct_llm") -> float:
    """total_runtime(n) / total_compiled(n) for one runtime strategy"""
    if n < 1:
        raise ValueError("n must be >= 1")
    total_runtime = n * ledger.per_tx(strategy)
    total_compiled = ledger.gen_tokens_compiled + n * ledger.per_tx(COMPILED)
    if total_compiled == 0:
        raise DivisionByZero("compiled total is zero", strategy=strategy, n=n)
    return total_runtime / total_compiled


@dataclass(frozen=True)
class TcoResult:
    inference: float
    infrastructure: float
    total: float
    ratio: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "inference": self.inference,
            "infrastructure": self.infrastructure,
            "total": self.total,
            "ratio": self.ratio,
        }


def tco(inference_cost: float, infra: float, reference_total: Optional[float] = None) -> TcoResult:
    """Total cost of ownership; ratio = reference_total / total when a reference is given"""
    if inference_cost < 0 or infra < 0:
        raise ValueError("costs must be >= 0")
    total = inference_cost + infra
    ratio = None
    if reference_total is not None and total > 0:
        ratio = reference_total / total
    return TcoResult(inference=inference_cost, infrastructure=infra, total=total, ratio=ratio)


# ---------------------------------------------------------------------------
# Determinism and latency
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyReport:
    run_count: int
    frequencies: Dict[str, float]
    entropy_bits: float
    reproducibility: float

    @property
    def distinct_outputs(self) -> int:
        return len(self.frequencies)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "run_count": self.run_count,
            "distinct_outputs": self.distinct_outputs,
            "entropy_bits": self.entropy_bits,
            "reproducibility": self.reproducibility,
            "log_base": 2,
        }


def entropy(outputs: Sequence[str]) -> EntropyReport:
    """Shannon entropy (bits) of the output digest distribution"""
    if not outputs:
        raise EmptyRunSet("no outputs to measure")
    counts = Counter(outputs)
    total = len(outputs)
    frequencies = {digest: count / total for digest, count in counts.items()}
    h = -sum(p * math.log2(p) for p in frequencies.values())
    return EntropyReport(
        run_count=total,
        frequencies=frequencies,
        entropy_bits=max(0.0, h),
        reproducibility=max(frequencies.values()),
    )


@dataclass(frozen=True)
class LatencyStats:
    p50: float
    p99: float
    samples: int
    mean: float

    @property
    def jitter(self) -> float:
        return self.p99 - self.p50

    def speedup(self, reference_p50: float) -> float:
        if self.p50 <= 0:
            raise DivisionByZero("P50 is zero")
        return reference_p50 / self.p50

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p50_ms": self.p50,
            "p99_ms": self.p99,
            "jitter_ms": self.jitter,
            "mean_ms": self.mean,
            "samples": self.samples,
        }


def _nearest_rank(ordered: Sequence[float], percentile: float) -> float:
    rank = max(1, math.ceil(percentile / 100 * len(ordered)))
    return ordered[rank - 1]


def latency_stats(samples: Sequence[float], minimum: int = MIN_LATENCY_SAMPLES) -> LatencyStats:
    """Nearest-rank P50/P99 over millisecond samples"""
    if len(samples) < minimum:
        raise InsufficientSamples(
            f"need at least {minimum} samples, got {len(samples)}", samples=len(samples)
        )
    ordered = sorted(samples)
    return LatencyStats(
        p50=_nearest_rank(ordered, 50),
        p99=_nearest_rank(ordered, 99),
        samples=len(ordered),
        mean=sum(ordered) / len(ordered),
    )


def measure_latency(fn: Callable[[], Any], samples: int = 1000, warmup: int = 10) -> LatencyStats:
    """Time `fn` repeatedly and summarize in milliseconds"""
    for _ in range(warmup):
        fn()
    durations: List[float] = []
    for _ in range(samples):
        start = time.perf_counter()
        fn()
        durations.append((time.perf_counter() - start) * 1000.0)
    stats = latency_stats(durations)
    LOG.info(f"Latency over {samples} runs: P50 {stats.p50:.3f} ms, jitter {stats.jitter:.3f} ms")
    return stats


def host_info() -> Dict[str, Any]:
    """Host facts recorded next to latency figures"""
    info: Dict[str, Any] = {
        "platform": platform.platform(),
        "python": platform.python_version(),
        "cpu_count_logical": psutil.cpu_count(logical=True),
        "cpu_count_physical": psutil.cpu_count(logical=False),
    }
    try:
        info["memory_total_mb"] = round(psutil.virtual_memory().total / (1024 * 1024))
        process = psutil.Process(os.getpid())
        info["process_rss_mb"] = round(process.memory_info().rss / (1024 * 1024), 1)
        freq = psutil.cpu_freq()
        if freq is not None:
            info["cpu_freq_mhz"] = round(freq.max or freq.current)
    except Exception as e:
        LOG.debug(f"Failed to read host info: {e}")
    return info


# ---------------------------------------------------------------------------
# Reliability
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExecutionOutcome:
    artifact_validated: bool
    succeeded: bool


@dataclass(frozen=True)
class ReliabilityReport:
    compile_attempts: int
    compile_passes: int
    deployed_executions: int
    deployed_successes: int

    @property
    def compile_success_rate(self) -> Optional[float]:
        if self.compile_attempts == 0:
            return None
        return self.compile_passes / self.compile_attempts

    @property
    def deployed_success_rate(self) -> Optional[float]:
        if self.deployed_executions == 0:
            return None
        return self.deployed_successes / self.deployed_executions

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "compile_attempts": self.compile_attempts,
            "compile_passes": self.compile_passes,
            "deployed_executions": self.deployed_executions,
        }
        if self.compile_success_rate is not None:
            payload["compile_success_rate"] = self.compile_success_rate
        if self.deployed_success_rate is not None:
            payload["deployed_success_rate"] = self.deployed_success_rate
        return payload


def reliability_report(
    compile_outcomes: Iterable[bool], execution_outcomes: Iterable[ExecutionOutcome] = ()
) -> ReliabilityReport:
    """Compile pass rate, and execution success over validated artifacts only"""
    compiles = list(compile_outcomes)
    deployed = [outcome for outcome in execution_outcomes if outcome.artifact_validated]
    return ReliabilityReport(
        compile_attempts=len(compiles),
        compile_passes=sum(1 for passed in compiles if passed),
        deployed_executions=len(deployed),
        deployed_successes=sum(1 for outcome in deployed if outcome.succeeded),
    )


# ---------------------------------------------------------------------------
# Reports and files
# ---------------------------------------------------------------------------


def economics_table(
    ledger: TokenLedger, pricing: Optional[PricingModel] = None, n: int = 1000
) -> Dict[str, Any]:
    """Token table (per strategy) plus the TCO table when pricing is given"""
    gen_tokens = ledger.gen_tokens_compiled
    compiled_per_tx = ledger.per_tx(COMPILED)
    strategies = [s for s in STRATEGIES if s in ledger.runtime_tokens_per_tx or s == COMPILED]
    strategies += sorted(
        s
        for s in set(ledger.runtime_tokens_per_tx) | set(ledger.transactions)
        if s not in STRATEGIES
    )

    tokens = []
    for strategy in strategies:
        per_tx = ledger.per_tx(strategy)
        row: Dict[str, Any] = {
            "strategy": strategy,
            "generation_tokens": gen_tokens if strategy == COMPILED else 0,
            "per_tx": per_tx,
            f"total_at_{n}": (gen_tokens if strategy == COMPILED else 0) + n * per_tx,
        }
        if strategy == COMPILED:
            row["compression_ratio"] = 1.0
        else:
            row["compression_ratio"] = compression_ratio(ledger, n, strategy)
            try:
                row["break_even"] = break_even(gen_tokens, per_tx, compiled_per_tx)
            except NoBreakEven:
                row["break_even"] = None
        tokens.append(row)

    table: Dict[str, Any] = {"n": n, "tokens": tokens}
    if pricing is not None and COMPILED in pricing.inference_per_month:
        compiled_tco = tco(
            pricing.inference_per_month[COMPILED],
            pricing.monthly_infrastructure.get(COMPILED, 0.0),
        )
        costs = []
        for strategy, inference in pricing.inference_per_month.items():
            result = tco(inference, pricing.monthly_infrastructure.get(strategy, 0.0))
            ratio = tco(
                compiled_tco.inference, compiled_tco.infrastructure, reference_total=result.total
            ).ratio
            costs.append({"strategy": strategy, **result.to_dict(), "ratio": ratio})
        table["tco"] = {
            "transactions_per_month": pricing.transactions_per_month,
            "compile_cost": pricing.token_cost(ledger.gen_input_tokens, ledger.gen_output_tokens),
            "rows": costs,
        }
    return table


def format_table(table: Mapping[str, Any]) -> str:
    """Plain-text rendering of economics_table output"""
    n = table["n"]
    lines = [
        f"{'Strategy':<18}{'Gen':>8}{'Per-tx':>9}{f'Total@{n}':>13}{'CompRatio':>11}{'n*':>9}",
    ]
    for row in table["tokens"]:
        n_star = row.get("break_even")
        lines.append(
            f"{row['strategy']:<18}{row['generation_tokens']:>8,}{row['per_tx']:>9,.0f}"
            f"{row[f'total_at_{n}']:>13,.0f}{row['compression_ratio']:>10.2f}x"
            f"{(f'{n_star:.2f}' if n_star is not None else '-'):>9}"
        )
    if "tco" in table:
        lines.append("")
        lines.append(f"{'Strategy':<18}{'Inference':>12}{'Infra':>9}{'Total':>12}{'Ratio':>9}")
        for row in table["tco"]["rows"]:
            ratio = row["ratio"]
            lines.append(
                f"{row['strategy']:<18}${row['inference']:>11,.0f}${row['infrastructure']:>8,.0f}"
                f"${row['total']:>11,.0f}{(f'{ratio:.1f}x' if ratio is not None else '-'):>9}"
            )
        lines.append(f"One-time compile cost: ${table['tco']['compile_cost']:,.2f}")
    return "\n".join(lines)


def _read_versioned(path: Path) -> Dict[str, Any]:
    try:
        document = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as e:
        raise LibraryError(f"Cannot read {path}: {e}") from None
    if not isinstance(document, dict) or document.get("format_version") != METRICS_FORMAT_VERSION:
        raise LibraryError(f"{path}: unsupported or missing format_version")
    return document


def load_ledger(path: Optional[Union[str, Path]] = None) -> TokenLedger:
    ledger_path = Path(path) if path else get_data_path("token_ledger.yaml")
    document = _read_versioned(ledger_path)
    generation = document.get("generation") or {}
    try:
        return TokenLedger(
            gen_input_tokens=int(generation.get("input_tokens", 0)),
            gen_output_tokens=int(generation.get("output_tokens", 0)),
            runtime_tokens_per_tx={
                str(k): int(v) for k, v in (document.get("runtime_tokens_per_tx") or {}).items()
            },
        )
    except (TypeError, ValueError) as e:
        raise LibraryError(f"{ledger_path}: invalid ledger: {e}") from None


def load_pricing(path: Optional[Union[str, Path]] = None) -> PricingModel:
    pricing_path = Path(path) if path else get_data_path("pricing.yaml")
    document = _read_versioned(pricing_path)
    try:
        return PricingModel(
            input_per_million=float(document["input_price_per_million"]),
            output_per_million=float(document["output_price_per_million"]),
            monthly_infrastructure={
                str(k): float(v)
                for k, v in (document.get("infrastructure_per_month") or {}).items()
            },
            inference_per_month={
                str(k): float(v)
                for k, v in (document.get("inference_cost_per_month") or {}).items()
            },
            transactions_per_month=int(document.get("transactions_per_month", 1_000_000)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise LibraryError(f"{pricing_path}: invalid pricing: {e}") from None
