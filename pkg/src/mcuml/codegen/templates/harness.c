/*
 * Static test harness template for generated model code.
 *
 * Splice points (resolved at generation time):
 *   {{NUM_FEATURES}}  width of the feature vector
 *   {{PREDICT_DECL}}  prediction entry point declaration block
 *   {{MODE}}          REPLAY or TIMING
 *
 * Replay mode reads comma-separated feature rows from stdin (an optional
 * header line with a non-numeric first field is skipped) and prints one
 * prediction per line: class index for classification, at least nine
 * significant digits for regression. Timing mode runs a fixed number of
 * predictions over deterministic pseudo-random inputs and prints the
 * mean nanoseconds per prediction.
 *
 * No dynamic allocation anywhere; the line buffer is fixed at MAX_LINE
 * bytes, which bounds the accepted input row length. Exit codes:
 * 0 success, 1 usage error, 2 input-format error.
 */
#define _POSIX_C_SOURCE 199309L

#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <time.h>

#define NUM_FEATURES {{NUM_FEATURES}}
#define HARNESS_MODE_{{MODE}} 1

{{PREDICT_DECL}}

#define MAX_LINE 4096

#if defined(HARNESS_MODE_REPLAY)

/* Returns 0 on success, 1 for skippable lines (header/blank), 2 on error. */
static int parse_row(const char *line, long line_no, float *out)
{
    const char *p = line;
    while (*p == ' ' || *p == '\t') {
        p++;
    }
    if (*p == '\n' || *p == '\r' || *p == '\0') {
        return 1; /* blank line */
    }
    for (int f = 0; f < NUM_FEATURES; ++f) {
        char *end = NULL;
        double value = strtod(p, &end);
        if (end == p) {
            if (f == 0) {
                return 1; /* header line: non-numeric first field */
            }
            fprintf(stderr, "line %ld: field %d is not numeric\n", line_no, f + 1);
            return 2;
        }
        out[f] = (float)value;
        p = end;
        while (*p == ' ' || *p == '\t') {
            p++;
        }
        if (f + 1 < NUM_FEATURES) {
            if (*p != ',') {
                fprintf(stderr, "line %ld: expected %d fields\n", line_no, NUM_FEATURES);
                return 2;
            }
            p++;
        }
    }
    if (*p == '\r') {
        p++;
    }
    if (*p != '\n' && *p != '\0') {
        fprintf(stderr, "line %ld: expected %d fields\n", line_no, NUM_FEATURES);
        return 2;
    }
    return 0;
}

int main(int argc, char **argv)
{
    (void)argv;
    if (argc != 1) {
        fprintf(stderr, "usage: feed CSV feature rows on stdin, no arguments\n");
        return 1;
    }
    char line[MAX_LINE];
    float features[NUM_FEATURES];
    long line_no = 0;
    while (fgets(line, sizeof line, stdin) != NULL) {
        line_no += 1;
        size_t len = strlen(line);
        if (len + 1 == sizeof line && line[len - 1] != '\n') {
            fprintf(stderr, "line %ld exceeds %d bytes\n", line_no, MAX_LINE - 1);
            return 2;
        }
        int status = parse_row(line, line_no, features);
        if (status == 1) {
            continue;
        }
        if (status != 0) {
            return 2;
        }
        pred_t prediction = predict(features);
#if PREDICT_CLASSIFICATION
        printf("%d\n", (int)prediction);
#else
        printf("%.9g\n", (double)prediction);
#endif
    }
    return 0;
}

#elif defined(HARNESS_MODE_TIMING)

#define TIMING_ITERATIONS 1000

static unsigned int lcg_state = 0x12345678u;

/* Deterministic input generator, roughly uniform over [-128, 128). */
static float lcg_value(void)
{
    lcg_state = lcg_state * 1664525u + 1013904223u;
    return ((float)(lcg_state >> 8) / 16777216.0f) * 256.0f - 128.0f;
}

int main(int argc, char **argv)
{
    (void)argv;
    if (argc != 1) {
        fprintf(stderr, "usage: no arguments\n");
        return 1;
    }
    float features[NUM_FEATURES];
    float consumed = 0.0f;
    struct timespec start;
    struct timespec stop;
    clock_gettime(CLOCK_MONOTONIC, &start);
    for (int it = 0; it < TIMING_ITERATIONS; ++it) {
        for (int f = 0; f < NUM_FEATURES; ++f) {
            features[f] = lcg_value();
        }
        consumed += (float)predict(features);
    }
    clock_gettime(CLOCK_MONOTONIC, &stop);
    long long elapsed_ns = (long long)(stop.tv_sec - start.tv_sec) * 1000000000LL
                         + (long long)(stop.tv_nsec - start.tv_nsec);
    long long per_prediction = elapsed_ns / TIMING_ITERATIONS;
    if (per_prediction < 1) {
        per_prediction = 1;
    }
    /* consume the accumulated result so the loop cannot be eliminated */
    fprintf(stderr, "predictions=%d checksum=%.9g\n",
            TIMING_ITERATIONS, (double)consumed);
    printf("ns_per_pred=%lld\n", per_prediction);
    return 0;
}

#else
#error "harness mode must be REPLAY or TIMING"
#endif
