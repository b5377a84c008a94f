//! rustls configuration for the TLS and mutual-TLS listener modes.

use std::sync::Arc;

use anyhow::Context;
use rustls::pki_types::{CertificateDer, PrivateKeyDer};
use rustls::server::WebPkiClientVerifier;
use rustls::RootCertStore;

fn provider() -> Arc<rustls::crypto::CryptoProvider> {
    Arc::new(rustls::crypto::ring::default_provider())
}

fn parse_certs(pem: &str) -> anyhow::Result<Vec<CertificateDer<'static>>> {
    let certs: Vec<_> = rustls_pemfile::certs(&mut pem.as_bytes())
        .collect::<Result<_, _>>()
        .context("parse certificate PEM")?;
    anyhow::ensure!(!certs.is_empty(), "no certificates in PEM");
    Ok(certs)
}

fn parse_key(pem: &str) -> anyhow::Result<PrivateKeyDer<'static>> {
    rustls_pemfile::private_key(&mut pem.as_bytes())
        .context("parse key PEM")?
        .context("no private key in PEM")
}

/// Server-side TLS. When `client_ca_pem` is given the listener requires a
/// client certificate chaining to that CA and refuses the connection during
/// the handshake otherwise.
pub fn server_tls_config(
    cert_pem: &str,
    key_pem: &str,
    client_ca_pem: Option<&str>,
) -> anyhow::Result<rustls::ServerConfig> {
    let certs = parse_certs(cert_pem)?;
    let key = parse_key(key_pem)?;
    let builder = rustls::ServerConfig::builder_with_provider(provider())
        .with_safe_default_protocol_versions()
        .context("protocol versions")?;
    let config = match client_ca_pem {
        Some(ca_pem) => {
            let mut roots = RootCertStore::empty();
            for cert in parse_certs(ca_pem)? {
                roots.add(cert).context("add client CA root")?;
            }
            let verifier = WebPkiClientVerifier::builder_with_provider(Arc::new(roots), provider())
                .build()
                .context("client verifier")?;
            builder.with_client_cert_verifier(verifier)
        }
        None => builder.with_no_client_auth(),
    }
    .with_single_cert(certs, key)
    .context("server certificate")?;
    Ok(config)
}

/// Client-side TLS for tests and the CLI: optionally presents a device
/// certificate, and trusts exactly the given server certificate.
pub fn client_tls_config(
    server_cert_pem: &str,
    client_identity: Option<(&str, &str)>,
) -> anyhow::Result<rustls::ClientConfig> {
    let mut roots = RootCertStore::empty();
    for cert in parse_certs(server_cert_pem)? {
        roots
            .add(cert)
            .context("server certificate not usable as a trust anchor")?;
    }
    let builder = rustls::ClientConfig::builder_with_provider(provider())
        .with_safe_default_protocol_versions()
        .context("protocol versions")?
        .with_root_certificates(roots);
    let config = match client_identity {
        Some((cert_pem, key_pem)) => builder
            .with_client_auth_cert(parse_certs(cert_pem)?, parse_key(key_pem)?)
            .context("client identity")?,
        None => builder.with_no_client_auth(),
    };
    Ok(config)
}
