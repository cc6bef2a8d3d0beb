//! Gauss-Hermite rules for the standard normal and their tensor products.

use meshctrl::quadrature::{gauss_hermite, tensor_expectation};

fn main() -> meshctrl::Result<()> {
    for order in [1, 2, 3, 4, 6] {
        let rule = gauss_hermite(order)?;
        let nodes: Vec<String> = rule.nodes().iter().map(|x| format!("{x:+.6}")).collect();
        println!("L={order}: nodes [{}]", nodes.join(", "));
    }

    // E[xi^4] = 3 needs L >= 3
    for order in 1..=4 {
        let rule = gauss_hermite(order)?;
        println!("L={order}: E[xi^4] ~ {:.12}", rule.integrate(|x| x.powi(4)));
    }

    // E[exp(a . xi)] = exp(|a|^2 / 2) in three dimensions
    let a = [0.3, -0.2, 0.5];
    let exact = (a.iter().map(|v| v * v).sum::<f64>() / 2.0).exp();
    for order in [2, 4, 8] {
        let rule = gauss_hermite(order)?;
        let v = tensor_expectation(&rule, 3, 1, |xi, out| {
            out[0] = (a[0] * xi[0] + a[1] * xi[1] + a[2] * xi[2]).exp();
        })?;
        println!("L={order}, d=3: E[exp(a.xi)] error {:.3e}", (v[0] - exact).abs());
    }
    Ok(())
}
