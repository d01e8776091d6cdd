//! Agreement scores between a labelling and a clustering, plus kNN and
//! K-Means on a toy embedding.

use dazzle_reid::reideval::{ami, ari, hungarian_accuracy, kmeans, knn_classify, nmi, KMeansConfig, Partition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let truth = Partition::from_labels(&["a", "a", "a", "b", "b", "b", "c", "c"]);
    let found = Partition::from_labels(&[0, 0, 1, 1, 1, 1, 2, 2]);
    println!("ARI {:.4}  AMI {:.4}  NMI {:.4}  HA {:.4}", ari(&truth, &found)?, ami(&truth, &found)?, nmi(&truth, &found)?, hungarian_accuracy(&truth, &found)?);

    // three well separated directions with a little spread
    let point = |angle: f64, jitter: f64| vec![(angle + jitter).cos(), (angle + jitter).sin()];
    let names = ["north", "west", "south"];
    let mut gallery = Vec::new();
    let mut labels = Vec::new();
    for (k, name) in names.iter().enumerate() {
        for j in 0..5 {
            gallery.push(point(k as f64 * 2.1, j as f64 * 0.05));
            labels.push(name.to_string());
        }
    }
    let queries = vec![point(0.1, 0.0), point(2.0, 0.0), point(4.3, 0.0)];
    let truth_q: Vec<Option<String>> = names.iter().map(|n| Some(n.to_string())).collect();
    let knn = knn_classify(&gallery, &labels, &queries, &truth_q, 5)?;
    println!("kNN predictions {:?}, accuracy {:?}", knn.predicted, knn.accuracy);

    let km = kmeans(&gallery, &KMeansConfig::new(3, 7))?;
    let clusters = Partition::from_labels(&km.labels);
    println!("K-Means inertia {:.5}, ARI against labels {:.3}", km.inertia, ari(&Partition::from_labels(&labels), &clusters)?);
    Ok(())
}
