//! Reference translation checked against the system compiler, in every mode.

use legoc_core::frontend::parse_source;
use legoc_core::pipeline::{compile_and_verify, Compiler, PipelineConfig};
use legoc_core::splitter::{AlwaysSplit, HeuristicPolicy, RandomPolicy, SplitConfig, SplitPolicy};
use legoc_core::toolchain::Toolchain;
use legoc_core::translation::{Mode, RefBackend};
use legoc_core::verify::{expectations_from, DriverSpec, Harness, TestCase, TestValue};

fn cases(args: &[Vec<TestValue>]) -> Vec<TestCase> {
    args.iter()
        .enumerate()
        .map(|(i, a)| TestCase {
            name: format!("c{i}"),
            args: a.clone(),
            ..TestCase::default()
        })
        .collect()
}

fn check(src: &str, function: &str, args: &[Vec<TestValue>]) {
    let tc = Toolchain::default();
    if !tc.available() {
        eprintln!("skipping: no toolchain");
        return;
    }
    let ast = parse_source(src).unwrap();
    let harness = Harness::default();
    let spec = DriverSpec::from_ast(&ast, function).unwrap();
    let base = cases(args);
    let observed = harness.reference_run(src, &spec, &base).unwrap();
    let tests = expectations_from(&base, &spec, &observed);
    assert_eq!(tests.len(), base.len(), "reference run failed: {observed:?}");
    let policies: Vec<(Mode, Box<dyn SplitPolicy>)> = vec![
        (Mode::Direct, Box::new(HeuristicPolicy)),
        (Mode::Workflow, Box::new(HeuristicPolicy)),
        (Mode::Lego, Box::new(AlwaysSplit)),
        (Mode::Lego, Box::new(RandomPolicy::new(7))),
    ];
    for (mode, policy) in policies {
        let config = PipelineConfig {
            mode,
            split: SplitConfig::default(),
        };
        let compiler = Compiler::new(&ast, config, &RefBackend, policy.as_ref());
        match compile_and_verify(&ast, function, &tests, &compiler, &harness, 1) {
            Ok(out) => assert_eq!(out.attempts.len(), 1),
            Err(e) => {
                let trail = e
                    .attempts()
                    .iter()
                    .map(|a| format!("{:#?}\n{}", a.report, a.module.clone().unwrap_or_default()))
                    .collect::<Vec<_>>()
                    .join("\n");
                panic!("{mode} failed for `{function}`: {e}\n{trail}");
            }
        }
    }
}

fn ints(v: &[&[i64]]) -> Vec<Vec<TestValue>> {
    v.iter().map(|a| a.iter().map(|x| TestValue::Int(*x)).collect()).collect()
}

#[test]
fn integer_arithmetic_across_kinds() {
    let src = "
        long f(int a, int b) {
            char c = a; unsigned char uc = a; short s = a * 300; unsigned short us = b;
            unsigned u = a; unsigned long ul = b; long l = a;
            long r = c + uc + s + us;
            r += (long)(u / 3u) + (long)(ul % 7ul) + l * 5;
            r ^= (a << 3) | (b >> 1);
            r -= (u >> 2) + (unsigned)(-b) % 11u;
            if (b != 0) r += a / b - a % b;
            r += (a < b) + (u > ul) * 2 + (c == uc) * 4 + (s >= us) * 8;
            r += ~a & 255;
            r += -l;
            r += sizeof(long) + sizeof r;
            return r;
        }";
    check(src, "f", &ints(&[&[1, 2], &[-7, 3], &[200, -9], &[123456, 77], &[-1, -1], &[0, 5]]));
}

#[test]
fn floating_point_and_conversions() {
    let src = "
        double g(double x, int n, float y) {
            float z = y * 2.5f + n;
            double d = x / 3.0 - z;
            unsigned long big = 18000000000000000000ul;
            double bd = big;
            unsigned long back = bd;
            int t = (int)(d * 10.0);
            if (d < x && x >= 0.0 || !(d == d)) d += 1.0;
            d += (x > z) + (x != 0.0) * 2;
            d += (double)(back / 1000000000000ul);
            d -= -z;
            return d + t + (float)n / 4;
        }";
    let args = vec![
        vec![TestValue::Float(1.5), TestValue::Int(3), TestValue::Float(0.25)],
        vec![TestValue::Float(-100.125), TestValue::Int(-7), TestValue::Float(3.0)],
        vec![TestValue::Float(0.0), TestValue::Int(0), TestValue::Float(-1.5)],
    ];
    check(src, "g", &args);
}

#[test]
fn pointers_arrays_and_records() {
    let src = "
        struct P { char tag; int xs[3]; double w; struct P *next; };
        union U { int i; unsigned char b[4]; };
        struct P glob[2];
        int total;
        int h(int k) {
            struct P a; struct P b = { 'x', { 1, 2, 3 }, 0.5, 0 };
            int arr[5] = { 4, 5 };
            int *p = arr;
            union U u;
            char msg[8] = \"hey\";
            int i;
            a = b;
            a.next = &b;
            a.xs[1] = k;
            glob[1] = a;
            glob[0].xs[2] = 9;
            *(p + 2) = a.next->xs[2] + glob[1].xs[1];
            p++;
            *p += 10;
            u.i = 0x01020304;
            for (i = 0; i < 5; i++) total += arr[i] * (i + 1);
            total += u.b[0] + msg[1] + (int)(&arr[4] - p) + glob[0].xs[2];
            total += (int)(a.w * 4.0) + a.tag;
            return total + *p-- + p[1];
        }";
    check(src, "h", &ints(&[&[0], &[5], &[-3]]));
}

#[test]
fn control_flow_constructs() {
    let src = "
        int counter;
        int step(int v) { counter++; return v * 2; }
        int sw(int x) {
            int r = 0;
            switch (x & 7) {
            case 0: r += 1;
            case 1: r += 2; break;
            case 5: { r = 50; break; }
            case -1: r = -1;
            default: r += 100;
            }
            return r;
        }
        int k(int n) {
            int s = 0, i, j;
            for (i = 0; i < n; i++) {
                if (i % 3 == 0) continue;
                for (j = 0; j < i; j++) { if (j == 4) break; s += j; }
                s += sw(i);
            }
            while (n > 0) { n -= 2; if (n == 3) { s -= 7; } else s++; }
            do { s += step(1); if (s & 1) continue; s++; } while (s < 40);
            s += n > 0 ? n : -n;
            s += (n == 0 || step(3) > 1) && counter;
            return s;
        }";
    check(src, "k", &ints(&[&[0], &[1], &[7], &[12], &[25]]));
}

#[test]
fn globals_strings_and_calls() {
    let src = "
        int printf(const char *fmt, ...);
        int g = 7;
        double scale = 2.5;
        char greeting[] = \"hi\";
        const char *name = \"legoc\";
        int *gp = &g;
        long acc[4];
        long fib(int n) { if (n < 2) return n; return fib(n - 1) + fib(n - 2); }
        void show(int v) {
            printf(\"%s %d %s %.2f\\n\", name, v, greeting, scale * v);
            acc[v & 3] += fib(v % 15);
            *gp += v;
        }";
    check(src, "show", &ints(&[&[3], &[10], &[-4]]));
}

#[test]
fn goto_function_is_translated_whole() {
    let src = "
        int gsum(int n) {
            int s = 0;
        again:
            if (n <= 0) goto done;
            s += n;
            n--;
            goto again;
        done:
            return s;
        }";
    check(src, "gsum", &ints(&[&[0], &[4], &[10]]));
}
