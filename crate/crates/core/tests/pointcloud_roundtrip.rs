use lidar_fiducial::pointcloud::{encode_cloud, parse_cloud, CloudFormat, PointCloud, PointL};
use proptest::prelude::*;

const FORMATS: [CloudFormat; 4] = [CloudFormat::PcdAscii, CloudFormat::PcdBinary, CloudFormat::PlyAscii, CloudFormat::Csv];

/// Coordinates and intensities exactly representable in f32, range > 0.
fn point() -> impl Strategy<Value = PointL> {
    (-500.0f32..500.0, -500.0f32..500.0, -500.0f32..500.0, 0.0f32..=1.0)
        .prop_filter("non-zero range", |(x, y, z, _)| x.abs() + y.abs() + z.abs() > 1e-3)
        .prop_map(|(x, y, z, i)| PointL::new(x as f64, y as f64, z as f64, i as f64))
}

fn cloud(max: usize) -> impl Strategy<Value = PointCloud> {
    prop::collection::vec(point(), 1..max).prop_map(PointCloud::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_format_round_trips(c in cloud(200)) {
        for format in FORMATS {
            let bytes = encode_cloud(&c, format).unwrap();
            let (back, report) = parse_cloud(&bytes, format).unwrap();
            prop_assert_eq!(report.records, c.len());
            prop_assert_eq!(report.clamped, 0);
            prop_assert_eq!(&back.points, &c.points, "{:?}", format);
        }
    }

    #[test]
    fn reencoding_is_stable(c in cloud(200)) {
        for format in FORMATS {
            let once = encode_cloud(&c, format).unwrap();
            let twice = encode_cloud(&parse_cloud(&once, format).unwrap().0, format).unwrap();
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn float_intensities_in_unit_range_are_untouched(i in prop::collection::vec(0.0f64..=1.0, 1..50)) {
        let text: String = std::iter::once("x,y,z,intensity\n".to_string())
            .chain(i.iter().map(|v| format!("1,2,3,{v:?}\n")))
            .collect();
        let (c, _) = parse_cloud(text.as_bytes(), CloudFormat::Csv).unwrap();
        let got: Vec<f64> = c.points.iter().map(|p| p.intensity).collect();
        prop_assert_eq!(got, i);
    }
}

#[test]
fn thousand_points_binary_pcd_bit_exact() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000);
    let points = (0..1000)
        .map(|_| {
            let mut v = || rng.random_range(-80.0f32..80.0);
            PointL::new((v() + 100.0) as f64, v() as f64, v() as f64, rng.random::<f32>() as f64)
        })
        .collect();
    let c = PointCloud::new(points);
    let bytes = encode_cloud(&c, CloudFormat::PcdBinary).unwrap();
    let (back, _) = parse_cloud(&bytes, CloudFormat::PcdBinary).unwrap();
    assert_eq!(back.points.len(), 1000);
    for (a, b) in back.points.iter().zip(&c.points) {
        assert_eq!(
            [a.x, a.y, a.z, a.intensity].map(f64::to_bits),
            [b.x, b.y, b.z, b.intensity].map(f64::to_bits)
        );
    }
}
