"""Driving an external compiler and measuring the resulting footprint.

Section-size convention (declared here, relied on by tests and reports):

    program memory = text + initialized data   (the flash-resident image)
    ram            = initialized data + zero-initialized data + stack_reserve

Initialized data counts twice because on the targeted MCU class it
occupies flash in the image and RAM at runtime. Static size tools cannot
see stack usage, so a fixed stack_reserve keeps the RAM verdict
conservative.

Cross compilers are configured, never bundled: a PlatformDescriptor only
carries budgets and command templates. The built-in descriptors pair the
memory budgets of three well-known MCU targets with the host C compiler,
which is enough for desk-scale sweeps and CI; point compile_command at a
real cross toolchain to measure actual target images.
"""

from __future__ import annotations

import json
import os
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, replace

import numpy as np

from .codegen import GeneratedSource, emit_size_probe, generate_replay_harness
from .estimators import estimate_model

BERKELEY_SIZE = "berkeley_size"
MAP_JSON = "map_json"

FITS = "fits"
PROGRAM_OVERFLOW = "program_overflow"
RAM_OVERFLOW = "ram_overflow"
BOTH_OVERFLOW = "both"

VERDICTS = (FITS, PROGRAM_OVERFLOW, RAM_OVERFLOW, BOTH_OVERFLOW)

# Environment variables forwarded to child processes. Everything else is
# dropped so compiles behave the same across machines.
ENV_ALLOWLIST = ("PATH", "HOME", "TMPDIR", "LANG", "LC_ALL", "CC")

# Strict warning profile used when verifying that generated sources are
# diagnostic-free; measurement builds use the descriptor's own command.
STRICT_CFLAGS = ("-std=c11", "-Wall", "-Wextra", "-Wpedantic", "-Werror",
                 "-O2", "-ffp-contract=off")

_HOST_COMPILE = ("cc", "-std=c11", "-Os", "-ffp-contract=off",
                 "-o", "{out}", "{src}", "-lm")
_HOST_SIZE = ("size", "{bin}")


class ToolchainError(RuntimeError):
    pass


class CompileError(ToolchainError):
    """Nonzero compiler exit; carries the captured diagnostics."""

    def __init__(self, message: str, diagnostics: str = ""):
        super().__init__(message)
        self.diagnostics = diagnostics


class CompileTimeout(CompileError):
    pass


class CompilerNotFound(CompileError):
    pass


class MeasurementError(ToolchainError):
    pass


class ReplayError(ToolchainError):
    pass


@dataclass(frozen=True)
class PlatformDescriptor:
    """A target's memory budgets plus its compile/size command templates.

    compile_command tokens may contain {src} (expands to all source file
    paths) and {out} (output binary path); size_command takes {bin}.
    """

    name: str
    program_memory_budget: int
    ram_budget: int
    compile_command: tuple[str, ...] = _HOST_COMPILE
    size_command: tuple[str, ...] = _HOST_SIZE
    size_output_dialect: str = BERKELEY_SIZE
    timeout: float = 120.0
    stack_reserve: int = 128

    def __post_init__(self):
        if self.program_memory_budget <= 0 or self.ram_budget <= 0:
            raise ToolchainError("memory budgets must be positive")
        if self.timeout <= 0:
            raise ToolchainError("timeout must be positive")
        if self.size_output_dialect not in (BERKELEY_SIZE, MAP_JSON):
            raise ToolchainError(f"unknown size dialect {self.size_output_dialect!r}")
        joined = " ".join(self.compile_command)
        if "{src}" not in joined or "{out}" not in joined:
            raise ToolchainError("compile_command needs {src} and {out} placeholders")
        if "{bin}" not in " ".join(self.size_command):
            raise ToolchainError("size_command needs a {bin} placeholder")


@dataclass(frozen=True)
class FootprintMeasurement:
    """Program-memory and RAM occupancy mapped from section sizes."""

    program_memory: int
    ram: int
    sections: dict
    diagnostics: str = ""
    wall_time: float = 0.0

    def __post_init__(self):
        if self.program_memory < 0 or self.ram < 0:
            raise ToolchainError("byte counts must be nonnegative")
        text = self.sections.get("text", 0)
        if self.program_memory < text:
            raise ToolchainError("program memory cannot be below the text size")


@dataclass(frozen=True)
class CompiledBinary:
    path: str
    platform_name: str
    diagnostics: str = ""
    wall_time: float = 0.0


BUILTIN_PLATFORMS = {
    # budgets of three popular MCU targets; compilation is host-based
    "msp430": PlatformDescriptor("msp430", program_memory_budget=16740, ram_budget=512),
    "atmega328": PlatformDescriptor("atmega328", program_memory_budget=32768, ram_budget=2048),
    "esp32": PlatformDescriptor("esp32", program_memory_budget=4 * 1024 * 1024,
                                ram_budget=544768),
    # effectively unconstrained host target for CI and validation runs
    "host": PlatformDescriptor("host", program_memory_budget=1 << 30, ram_budget=1 << 28),
}


def builtin_platform(name: str) -> PlatformDescriptor:
    if name not in BUILTIN_PLATFORMS:
        known = ", ".join(sorted(BUILTIN_PLATFORMS))
        raise ToolchainError(f"unknown platform {name!r} (known: {known})")
    return BUILTIN_PLATFORMS[name]


def load_platform(path: str | os.PathLike) -> PlatformDescriptor:
    """Parse a `key = value` descriptor file (commands are shell-split)."""
    values: dict[str, str] = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ToolchainError(f"{path}:{line_no}: expected key = value")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    try:
        return PlatformDescriptor(
            name=values["name"],
            program_memory_budget=int(values["program_memory_budget"]),
            ram_budget=int(values["ram_budget"]),
            compile_command=tuple(shlex.split(values["compile_command"]))
            if "compile_command" in values else _HOST_COMPILE,
            size_command=tuple(shlex.split(values["size_command"]))
            if "size_command" in values else _HOST_SIZE,
            size_output_dialect=values.get("size_output_dialect", BERKELEY_SIZE),
            timeout=float(values.get("timeout", 120.0)),
            stack_reserve=int(values.get("stack_reserve", 128)),
        )
    except KeyError as exc:
        raise ToolchainError(f"{path}: missing required key {exc}") from None


def _child_env() -> dict:
    return {key: os.environ[key] for key in ENV_ALLOWLIST if key in os.environ}


def _expand(template, **slots) -> list[str]:
    argv: list[str] = []
    for token in template:
        if token == "{src}":
            argv.extend(slots["src"])
            continue
        for slot, value in slots.items():
            if slot == "src":
                continue
            token = token.replace("{" + slot + "}", value)
        argv.append(token)
    return argv


def compile_sources(sources: dict[str, str], platform: PlatformDescriptor,
                    workdir: str | os.PathLike | None = None,
                    extra_flags: tuple[str, ...] = ()) -> CompiledBinary:
    """Write the given sources into a fresh directory and compile them.

    sources maps file names to text; every *.c file is passed to the
    compiler. Each call gets its own isolated directory so concurrent
    compiles never collide.
    """
    build_dir = tempfile.mkdtemp(prefix="mcuml-build-", dir=workdir)
    paths = []
    for fname, text in sources.items():
        path = os.path.join(build_dir, fname)
        with open(path, "w") as fh:
            fh.write(text)
        if fname.endswith(".c"):
            paths.append(path)
    out = os.path.join(build_dir, "prog")
    argv = _expand(platform.compile_command, src=paths, out=out)
    if extra_flags:
        argv = [argv[0], *extra_flags, *argv[1:]]
    started = time.monotonic()
    try:
        proc = subprocess.run(argv, capture_output=True, text=True,
                              timeout=platform.timeout, env=_child_env())
    except FileNotFoundError:
        raise CompilerNotFound(f"compiler not found: {argv[0]}") from None
    except subprocess.TimeoutExpired:
        raise CompileTimeout(
            f"compile exceeded {platform.timeout}s on {platform.name}") from None
    elapsed = time.monotonic() - started
    diagnostics = proc.stderr + proc.stdout
    if proc.returncode != 0:
        raise CompileError(
            f"compiler exited with {proc.returncode} on {platform.name}", diagnostics)
    if not os.path.exists(out):
        raise CompileError("compiler succeeded but produced no binary", diagnostics)
    return CompiledBinary(out, platform.name, diagnostics, elapsed)


def parse_berkeley_size(text: str) -> dict:
    """Parse `size` default output: a header line, then text/data/bss columns."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header_idx = None
    for i, line in enumerate(lines):
        cols = line.split()
        if {"text", "data", "bss"} <= set(cols):
            header_idx = i
            header = cols
            break
    if header_idx is None or header_idx + 1 >= len(lines):
        raise MeasurementError(f"unrecognized size output: {text[:200]!r}")
    values = lines[header_idx + 1].split()
    sections = {}
    for name in ("text", "data", "bss"):
        col = header.index(name)
        if col >= len(values):
            raise MeasurementError(f"short size row: {lines[header_idx + 1]!r}")
        try:
            sections[name] = int(values[col], 0)
        except ValueError:
            raise MeasurementError(
                f"non-numeric {name} column in size row: {lines[header_idx + 1]!r}"
            ) from None
    return sections


def measure_footprint(binary: CompiledBinary,
                      platform: PlatformDescriptor) -> FootprintMeasurement:
    """Run the platform's size command and map sections to the convention."""
    argv = _expand(platform.size_command, src=[], bin=binary.path)
    started = time.monotonic()
    try:
        proc = subprocess.run(argv, capture_output=True, text=True,
                              timeout=platform.timeout, env=_child_env())
    except FileNotFoundError:
        raise MeasurementError(f"size tool not found: {argv[0]}") from None
    except subprocess.TimeoutExpired:
        raise MeasurementError(f"size command exceeded {platform.timeout}s") from None
    if proc.returncode != 0:
        raise MeasurementError(f"size command failed: {proc.stderr.strip()[:200]}")
    if platform.size_output_dialect == BERKELEY_SIZE:
        sections = parse_berkeley_size(proc.stdout)
    else:
        try:
            raw = json.loads(proc.stdout)
            sections = {k: int(raw[k]) for k in ("text", "data", "bss")}
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise MeasurementError(f"bad map_json size output: {exc}") from None
    return FootprintMeasurement(
        program_memory=sections["text"] + sections["data"],
        ram=sections["data"] + sections["bss"] + platform.stack_reserve,
        sections=sections,
        diagnostics=binary.diagnostics,
        wall_time=time.monotonic() - started,
    )


def check_budget(measurement: FootprintMeasurement,
                 platform: PlatformDescriptor) -> str:
    program_over = measurement.program_memory > platform.program_memory_budget
    ram_over = measurement.ram > platform.ram_budget
    if program_over and ram_over:
        return BOTH_OVERFLOW
    if program_over:
        return PROGRAM_OVERFLOW
    if ram_over:
        return RAM_OVERFLOW
    return FITS


def run_replay(binary: CompiledBinary, rows: np.ndarray,
               timeout: float = 120.0) -> list[str]:
    """Feed feature rows to a replay binary, one CSV line each.

    Returns one output line per row; raises on crashes, timeouts, and
    line-count mismatches.
    """
    rows = np.asarray(rows, dtype=np.float64)
    payload = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in rows)
    try:
        proc = subprocess.run([binary.path], input=payload, capture_output=True,
                              text=True, timeout=timeout, env=_child_env())
    except subprocess.TimeoutExpired:
        raise ReplayError(f"replay exceeded {timeout}s") from None
    if proc.returncode != 0:
        detail = f"signal {-proc.returncode}" if proc.returncode < 0 \
            else f"exit code {proc.returncode}"
        raise ReplayError(f"replay failed with {detail}: {proc.stderr.strip()[:200]}")
    lines = proc.stdout.splitlines()
    if len(lines) != len(rows):
        raise ReplayError(f"expected {len(rows)} prediction lines, got {len(lines)}")
    return lines


def parse_predictions(lines: list[str], classification: bool) -> np.ndarray:
    values = []
    for i, line in enumerate(lines, start=1):
        try:
            values.append(int(line) if classification else float(line))
        except ValueError:
            raise ReplayError(f"non-numeric prediction on line {i}: {line!r}") from None
    return np.array(values, dtype=np.int64 if classification else np.float64)


def run_timing(binary: CompiledBinary, timeout: float = 120.0) -> int:
    """Run a timing harness binary and return nanoseconds per prediction."""
    try:
        proc = subprocess.run([binary.path], capture_output=True, text=True,
                              timeout=timeout, env=_child_env())
    except subprocess.TimeoutExpired:
        raise ReplayError(f"timing run exceeded {timeout}s") from None
    if proc.returncode != 0:
        raise ReplayError(f"timing run failed with exit code {proc.returncode}")
    for line in proc.stdout.splitlines():
        if line.startswith("ns_per_pred="):
            try:
                return int(line.partition("=")[2])
            except ValueError:
                raise ReplayError(f"bad timing output line: {line!r}") from None
    raise ReplayError(f"no ns_per_pred line in timing output: {proc.stdout[:200]!r}")


# --- backends ----------------------------------------------------------------

class HostToolchain:
    """Real backend: compiles a size probe with the platform's command and
    measures the produced binary."""

    name = "real"

    def __init__(self, workdir: str | os.PathLike | None = None):
        self._own = workdir is None
        self.workdir = str(workdir) if workdir else tempfile.mkdtemp(prefix="mcuml-tc-")

    def build_and_measure(self, generated: GeneratedSource, model,
                          platform: PlatformDescriptor) -> FootprintMeasurement:
        sources = {
            "model.c": generated.model_c,
            "model.h": generated.model_h,
            "size_main.c": emit_size_probe(generated),
        }
        binary = compile_sources(sources, platform, self.workdir)
        return measure_footprint(binary, platform)

    def build_replay(self, generated: GeneratedSource,
                     platform: PlatformDescriptor) -> CompiledBinary:
        sources = {
            "model.c": generated.model_c,
            "model.h": generated.model_h,
            "harness.c": generate_replay_harness(generated, "replay"),
        }
        return compile_sources(sources, platform, self.workdir)

    def cleanup(self):
        if self._own:
            shutil.rmtree(self.workdir, ignore_errors=True)


class MockToolchain:
    """Test double: compilation always succeeds instantly and the measured
    program memory equals the model's analytical estimate plus a fixed,
    configurable offset. Reproduces the platform-specific offset between
    shape-based estimates and real images without an external compiler."""

    name = "mock"

    def __init__(self, program_offset: int = 0, ram_offset: int = 0,
                 scalar_width: int = 4):
        self.program_offset = program_offset
        self.ram_offset = ram_offset
        self.scalar_width = scalar_width

    def build_and_measure(self, generated: GeneratedSource, model,
                          platform: PlatformDescriptor) -> FootprintMeasurement:
        analytical = estimate_model(model, self.scalar_width)
        program = analytical.total_bytes + self.program_offset
        ram = self.ram_offset + platform.stack_reserve
        sections = {"text": program, "data": 0, "bss": self.ram_offset}
        return FootprintMeasurement(program, ram, sections, diagnostics="mock")


def host_platform_with_budgets(budgets_from: PlatformDescriptor) -> PlatformDescriptor:
    """Convenience: the named platform's budgets with host compilation."""
    return replace(BUILTIN_PLATFORMS["host"], name=budgets_from.name,
                   program_memory_budget=budgets_from.program_memory_budget,
                   ram_budget=budgets_from.ram_budget)
