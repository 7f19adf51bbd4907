//! Forward and backward passes for the layer kinds in the network.
//!
//! Every forward call that participates in training returns a cache holding
//! what its backward pass needs. The `*_apply` variants skip the cache for
//! inference.

mod activation;
mod conv;
mod dense;
mod resample;

pub use activation::{relu, relu_backward, relu_forward, Activation, ReluCache};
pub use conv::{
    conv2d_apply, conv2d_backward, conv2d_forward, deconv2d_apply, deconv2d_backward,
    deconv2d_forward, ConvCache, ConvGrads, ConvParams,
};
pub use dense::{dense_apply, dense_backward, dense_forward, DenseCache, DenseGrads, DenseParams};
pub use resample::{
    avgpool2, avgpool2_backward, avgpool2_forward, upsample2, upsample2_backward,
    upsample2_forward, PoolCache, UpsampleCache,
};
