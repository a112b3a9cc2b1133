use dermaseg::nn::{relu, relu_backward, GradBuffer, ParamStore, UNet};
use dermaseg::seeds::rng_from;
use ndarray::{concatenate, s, Array3, Axis};
use rand::Rng;

fn main() {
    let mut ps = ParamStore::new();
    let mut rng = rng_from(4);
    let net = UNet::new(&mut ps, "net", 2, 1, 2, 1, &mut rng);
    let mut rng = rng_from(5);
    let x = Array3::from_shape_fn((2, 4, 4), |_| rng.gen::<f64>());

    // UNet's own backward.
    let (y, cache) = net.forward(&ps, &x, None);
    let mut gb_unet = GradBuffer::zeros_like(&ps);
    net.backward(&ps, &cache, &y, Some(&mut gb_unet));

    // Hand-built identical graph.
    let a0 = relu(&net.stem.forward(&ps, &x));
    let a1 = relu(&net.down[0].forward(&ps, &a0));
    let t = relu(&net.up[0].upsample.forward(&ps, &a1));
    let c = concatenate(Axis(0), &[t.view(), a0.view()]).unwrap();
    let o = relu(&net.up[0].fuse.forward(&ps, &c));
    let y2 = net.head.forward(&ps, &o);
    println!("forward outputs equal: {}", y == y2);

    let mut gb = GradBuffer::zeros_like(&ps);
    let dy = y2.clone();
    let do_ = net.head.backward(&ps, &o, &dy, Some(&mut gb));
    let dom = relu_backward(&o, &do_);
    let dc = net.up[0].fuse.backward(&ps, &c, &dom, Some(&mut gb));
    let dt = dc.slice(s![..2, .., ..]).to_owned();
    let dskip = dc.slice(s![2.., .., ..]).to_owned();
    let dtm = relu_backward(&t, &dt);
    let da1 = net.up[0].upsample.backward(&ps, &a1, &dtm, Some(&mut gb));
    let dz1 = relu_backward(&a1, &da1);
    let mut da0 = net.down[0].backward(&ps, &a0, &dz1, Some(&mut gb));
    da0 += &dskip;
    let dz0 = relu_backward(&a0, &da0);
    net.stem.backward(&ps, &x, &dz0, Some(&mut gb));

    for i in 0..ps.flat_len() {
        let a = gb_unet.get_flat(i);
        let b = gb.get_flat(i);
        if (a - b).abs() > 1e-12 {
            println!("param {i}: unet={a:.9} manual={b:.9}");
        }
    }
    println!("done comparing");
}
