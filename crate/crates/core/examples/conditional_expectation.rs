//! One-step conditional expectations of an interpolated field under an
//! Euler-Maruyama step, against the exact Gaussian value.

use meshctrl::condexp::{cond_exp, cond_exp_dw, FnDynamics, OneStepModel};
use meshctrl::meshfree::{interp_field, InterpConfig};
use meshctrl::pointcloud::{halton_cloud, DomainBox};
use meshctrl::quadrature::gauss_hermite;

fn main() -> meshctrl::Result<()> {
    // dX = u X dt + s X dW
    let s = 0.2;
    let dynamics = FnDynamics::new(
        1,
        1,
        |x: &[f64], u: &[f64], out: &mut [f64]| out[0] = u[0] * x[0],
        move |x: &[f64], _u: &[f64], out: &mut [f64]| out[0] = s * x[0],
    );
    let dt = 0.05;
    let model = OneStepModel::new(&dynamics, &[0.5], dt)?;
    let rule = gauss_hermite(4)?;

    let cloud = halton_cloud(400, &DomainBox::cube(1, 0.0, 2.0)?)?;
    let values: Vec<f64> = cloud.iter().map(|x| x[0] * x[0]).collect();
    let field = interp_field(&cloud, &values, &InterpConfig::mls())?;

    println!("{:>5} {:>14} {:>14} {:>14}", "x", "E[phi]", "exact", "E[phi dW]/dt");
    for x in [0.5, 1.0, 1.5] {
        let mean = x + 0.5 * x * dt;
        let sd = s * x * dt.sqrt();
        let exact = mean * mean + sd * sd;
        let e = cond_exp(&field, &model, &[x], &rule)?;
        let z = cond_exp_dw(&field, &model, &[x], &rule)?;
        println!("{x:5.2} {:14.8} {exact:14.8} {:14.8}", e[0], z[0] / dt);
    }
    Ok(())
}
