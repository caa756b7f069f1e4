//! Planar float images and the handful of operations every other module
//! builds on: tiling, blur, pyramids, resizing, luma and PNG I/O.

mod blocks;
mod buffer;
mod color;
mod filter;
mod io;
mod resize;

pub use blocks::{compose_grid, grid_side, partition_blocks, BlockGrid};
pub use buffer::ImageBuffer;
pub use color::{luma_adjoint, rgb_to_luma, to_rgb, LUMA_WEIGHTS};
pub use filter::{
    decimate2, gaussian_blur, gaussian_blur_adjoint, gaussian_kernel, gaussian_pyramid,
    PYRAMID_SIGMA,
};
pub use io::{list_png_dir, load_image, quantize, save_image};
pub use resize::{center_crop_resize, resize_bilinear};
