use criterion::{black_box, criterion_group, criterion_main, Criterion};
use ndarray::Array2;

use lipsync_core::facegeo::{canny, to_gray, DEFAULT_HIGH, DEFAULT_LOW, MAP_SIZE};
use lipsync_core::features::{extract_mfcc_aligned, Placement, Point};
use lipsync_core::synthdata::{render_portrait, synth_speech, SyntheticFace};
use lipsync_core::{Generator, GeneratorConfig};

fn audio_window() -> Array2<f64> {
    Array2::from_shape_fn((200, 13), |(t, c)| ((t * 7 + c * 3) as f64 * 0.37).sin())
}

fn mfcc(c: &mut Criterion) {
    let pcm = synth_speech(10.0, 16_000, 1);
    c.bench_function("mfcc 10 s @ 16 kHz", |b| b.iter(|| extract_mfcc_aligned(black_box(&pcm)).unwrap()));
}

fn generator(c: &mut Criterion) {
    let x = audio_window();
    let compact = Generator::new(GeneratorConfig::compact(), 1).unwrap();
    c.bench_function("generator forward (compact)", |b| b.iter(|| compact.forward(black_box(&x)).unwrap()));
    let full = Generator::new(GeneratorConfig::default(), 1).unwrap();
    let mut group = c.benchmark_group("slow");
    group.sample_size(10);
    group.bench_function("generator forward (full width)", |b| b.iter(|| full.forward(black_box(&x)).unwrap()));
    group.finish();
}

fn edges(c: &mut Criterion) {
    let face = SyntheticFace::standard();
    let placement = Placement {
        nose: Point::new(256.0, 250.0),
        roll: 0.0,
        scale: 150.0,
    };
    let lm = face.landmarks(&face.rest_mouth(), &placement, 0, (MAP_SIZE, MAP_SIZE)).unwrap();
    let gray = to_gray(&render_portrait(&lm));
    c.bench_function("canny 512x512", |b| b.iter(|| canny(black_box(&gray), DEFAULT_LOW, DEFAULT_HIGH).unwrap()));
}

criterion_group!(benches, mfcc, generator, edges);
criterion_main!(benches);
