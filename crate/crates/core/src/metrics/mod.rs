//! Frame quality metrics, accuracy under tolerance, and subset reports.

mod psnr;
mod report;
mod ssim;
mod tolerance;

pub use psnr::{mse, psnr, psnr_from_mse, PSNR_CAP_DB};
pub use report::{
    build_report, format_cell, reports_to_json, summarize, Subset, SubsetReport, Summary,
};
pub use ssim::{ssim, ssim_planes, SSIM_K1, SSIM_K2, SSIM_SIGMA, SSIM_WINDOW};
pub use tolerance::tolerance_accuracy;
