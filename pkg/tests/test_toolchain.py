import dataclasses
import time

import numpy as np
import pytest

from conftest import requires_cc
from mcuml.codegen import generate
from mcuml.estimators import estimate_model
from mcuml.models import ForestModel, Leaf, SplitNode, make_config, train_model
from mcuml.toolchain import (BOTH_OVERFLOW, CompileError, CompileTimeout,
                             CompiledBinary, CompilerNotFound, FITS,
                             FootprintMeasurement, MeasurementError,
                             MockToolchain, PROGRAM_OVERFLOW,
                             PlatformDescriptor, RAM_OVERFLOW, ReplayError,
                             ToolchainError, builtin_platform, check_budget,
                             compile_sources, load_platform, measure_footprint,
                             parse_berkeley_size, parse_predictions, run_replay)

TRIVIAL_MAIN = "int main(void) { return 0; }\n"


class TestDescriptors:
    def test_builtin_budgets(self):
        assert builtin_platform("msp430").program_memory_budget == 16740
        assert builtin_platform("msp430").ram_budget == 512
        assert builtin_platform("atmega328").program_memory_budget == 32768
        assert builtin_platform("atmega328").ram_budget == 2048
        assert builtin_platform("esp32").program_memory_budget == 4 * 1024 * 1024
        assert builtin_platform("esp32").ram_budget == 544768

    def test_unknown_name_lists_known(self):
        with pytest.raises(ToolchainError, match="msp430"):
            builtin_platform("pdp11")

    def test_placeholders_required(self):
        with pytest.raises(ToolchainError):
            PlatformDescriptor("x", 1, 1, compile_command=("cc", "-o", "{out}"))

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "target.platform"
        path.write_text(
            "# custom target\n"
            "name = custom\n"
            "program_memory_budget = 1234\n"
            "ram_budget = 256\n"
            "compile_command = cc -Os -o {out} {src} -lm\n"
            "size_command = size {bin}\n"
            "timeout = 30\n"
            "stack_reserve = 64\n"
        )
        platform = load_platform(path)
        assert platform.name == "custom"
        assert platform.program_memory_budget == 1234
        assert platform.stack_reserve == 64
        assert platform.compile_command[0] == "cc"

    def test_file_missing_key(self, tmp_path):
        path = tmp_path / "bad.platform"
        path.write_text("name = x\n")
        with pytest.raises(ToolchainError, match="missing"):
            load_platform(path)


class TestBerkeleyParsing:
    def test_reference_line(self):
        sections = parse_berkeley_size(
            "   text\t   data\t    bss\t    dec\t    hex\tfilename\n"
            "   1200\t     16\t     64\t   1280\t    500\tprog\n")
        assert sections == {"text": 1200, "data": 16, "bss": 64}
        platform = builtin_platform("msp430")
        m = FootprintMeasurement(sections["text"] + sections["data"],
                                 sections["data"] + sections["bss"]
                                 + platform.stack_reserve, sections)
        assert m.program_memory == 1216
        assert m.ram == 80 + 128

    def test_malformed_output_names_line(self):
        with pytest.raises(MeasurementError, match="size"):
            parse_berkeley_size("not a size table\n")
        with pytest.raises(MeasurementError):
            parse_berkeley_size("text data bss\nfoo bar baz\n")


class TestCheckBudget:
    def _measurement(self, program, ram):
        return FootprintMeasurement(program, ram, {"text": program, "data": 0,
                                                   "bss": max(0, ram - 128)})

    def test_fits_within_small_target(self):
        msp = builtin_platform("msp430")
        assert check_budget(self._measurement(12 * 1024, 400), msp) == FITS

    def test_program_overflow(self):
        msp = builtin_platform("msp430")
        assert check_budget(self._measurement(24 * 1024, 400), msp) == PROGRAM_OVERFLOW

    def test_ram_overflow_and_both(self):
        msp = builtin_platform("msp430")
        assert check_budget(self._measurement(1024, 600), msp) == RAM_OVERFLOW
        assert check_budget(self._measurement(24 * 1024, 600), msp) == BOTH_OVERFLOW

    def test_zero_measurement_fits(self):
        assert check_budget(self._measurement(0, 0), builtin_platform("msp430")) == FITS

    def test_monotone(self):
        rng = np.random.default_rng(0)
        msp = builtin_platform("msp430")
        order = [FITS, PROGRAM_OVERFLOW, RAM_OVERFLOW, BOTH_OVERFLOW]
        for _ in range(200):
            program = int(rng.integers(0, 40000))
            ram = int(rng.integers(0, 1200))
            before = check_budget(self._measurement(program, ram), msp)
            after = check_budget(self._measurement(program + int(rng.integers(0, 9000)),
                                                   ram + int(rng.integers(0, 400))), msp)
            if before != FITS:
                assert after != FITS
            if before == PROGRAM_OVERFLOW:
                assert after in (PROGRAM_OVERFLOW, BOTH_OVERFLOW)


class TestMock:
    def _candidates(self, lte_small, vehicle_small):
        ann = train_model(lte_small, np.arange(lte_small.n_rows),
                          make_config("ann", hidden_layers=1, neurons=4,
                                      epochs=3, seed=0))
        svm = train_model(vehicle_small, np.arange(vehicle_small.n_rows),
                          make_config("svm", seed=0))
        return [(lte_small, ann), (vehicle_small, svm)]

    def test_offset_addition(self, lte_small, vehicle_small):
        platform = builtin_platform("msp430")
        for offset in (0, 5000, 150000):
            mock = MockToolchain(program_offset=offset)
            for ds, model in self._candidates(lte_small, vehicle_small):
                gs = generate(model)
                m = mock.build_and_measure(gs, model, platform)
                assert m.program_memory - estimate_model(model).total_bytes == offset

    def test_deterministic(self, lte_small, vehicle_small):
        mock = MockToolchain(program_offset=77)
        platform = builtin_platform("host")
        (_, model), _ = self._candidates(lte_small, vehicle_small)
        gs = generate(model)
        a = mock.build_and_measure(gs, model, platform)
        b = mock.build_and_measure(gs, model, platform)
        assert a.program_memory == b.program_memory and a.ram == b.ram


@requires_cc
class TestCompile:
    def test_smoke(self, host_platform, tmp_path):
        binary = compile_sources({"main.c": TRIVIAL_MAIN}, host_platform, tmp_path)
        import os
        assert os.path.exists(binary.path)

    def test_generated_stump_compiles(self, host_platform, tmp_path):
        model = ForestModel("regression", 2,
                            (SplitNode(0, 1.0, Leaf(0.5), Leaf(1.5)),), "mean")
        gs = generate(model)
        from mcuml.codegen import emit_size_probe
        binary = compile_sources({"model.c": gs.model_c, "model.h": gs.model_h,
                                  "size_main.c": emit_size_probe(gs)},
                                 host_platform, tmp_path)
        m = measure_footprint(binary, host_platform)
        assert m.program_memory > 0

    def test_syntax_error_carries_diagnostics(self, host_platform, tmp_path):
        with pytest.raises(CompileError) as err:
            compile_sources({"main.c": "int main(void) { return }\n"},
                            host_platform, tmp_path)
        assert err.value.diagnostics.strip()

    def test_tiny_timeout(self, host_platform, tmp_path):
        fast = dataclasses.replace(host_platform, timeout=0.001)
        started = time.monotonic()
        with pytest.raises(CompileTimeout):
            compile_sources({"main.c": TRIVIAL_MAIN}, fast, tmp_path)
        assert time.monotonic() - started < 3.0

    def test_missing_compiler(self, host_platform, tmp_path):
        broken = dataclasses.replace(
            host_platform, compile_command=("no-such-cc-anywhere", "-o", "{out}", "{src}"))
        with pytest.raises(CompilerNotFound):
            compile_sources({"main.c": TRIVIAL_MAIN}, broken, tmp_path)

    def test_isolated_build_dirs(self, host_platform, tmp_path):
        a = compile_sources({"main.c": TRIVIAL_MAIN}, host_platform, tmp_path)
        b = compile_sources({"main.c": TRIVIAL_MAIN}, host_platform, tmp_path)
        import os
        assert os.path.dirname(a.path) != os.path.dirname(b.path)

    def test_measurement_stable(self, host_platform, tmp_path):
        binary = compile_sources({"main.c": TRIVIAL_MAIN}, host_platform, tmp_path)
        a = measure_footprint(binary, host_platform)
        b = measure_footprint(binary, host_platform)
        assert a.program_memory == b.program_memory and a.ram == b.ram


ECHO_COUNTER = r"""
#include <stdio.h>
int main(void) {
    char line[256];
    while (fgets(line, sizeof line, stdin) != NULL) {
        printf("1.0\n");
    }
    return 0;
}
"""


@requires_cc
class TestReplayRunner:
    def test_line_per_row(self, host_platform, tmp_path):
        binary = compile_sources({"main.c": ECHO_COUNTER}, host_platform, tmp_path)
        rows = np.random.default_rng(0).normal(size=(100, 3))
        lines = run_replay(binary, rows)
        assert len(lines) == 100

    def test_crash_reported(self, host_platform, tmp_path):
        crasher = "#include <stdlib.h>\nint main(void) { abort(); }\n"
        binary = compile_sources({"main.c": crasher}, host_platform, tmp_path)
        with pytest.raises(ReplayError, match="signal"):
            run_replay(binary, np.zeros((3, 1)))

    def test_line_count_mismatch(self, host_platform, tmp_path):
        silent = "int main(void) { return 0; }\n"
        binary = compile_sources({"main.c": silent}, host_platform, tmp_path)
        with pytest.raises(ReplayError, match="expected 3"):
            run_replay(binary, np.zeros((3, 1)))

    def test_non_numeric_prediction(self):
        with pytest.raises(ReplayError, match="line 2"):
            parse_predictions(["1.0", "soup"], classification=False)
