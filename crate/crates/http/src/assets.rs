//! Static files for the browser engine, rooted at the asset directory.

use std::path::{Component, Path, PathBuf};

#[derive(Debug, PartialEq, Eq)]
pub enum AssetPath {
    File(PathBuf),
    /// The request tried to leave the asset directory.
    Forbidden,
}

/// Maps a request path (already percent-decoded, without the `/assets/`
/// prefix) onto the asset directory.
pub fn resolve(root: &Path, request: &str) -> AssetPath {
    if request.contains('\\') || request.contains('\0') {
        return AssetPath::Forbidden;
    }
    let mut path = root.to_path_buf();
    for part in Path::new(request).components() {
        match part {
            Component::Normal(p) => path.push(p),
            Component::CurDir => {}
            Component::ParentDir | Component::RootDir | Component::Prefix(_) => {
                return AssetPath::Forbidden
            }
        }
    }
    AssetPath::File(path)
}

pub fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("js" | "mjs") => "text/javascript; charset=utf-8",
        Some("html") => "text/html; charset=utf-8",
        Some("css") => "text/css; charset=utf-8",
        Some("json" | "map") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        Some("txt") => "text/plain; charset=utf-8",
        _ => "application/octet-stream",
    }
}
