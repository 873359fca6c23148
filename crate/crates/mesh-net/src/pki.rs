//! Development CA and leaf certificate generation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rcgen::{
    BasicConstraints, CertificateParams, DnType, ExtendedKeyUsagePurpose, IsCa, Issuer, KeyPair,
    SanType,
};
use sha2::{Digest, Sha256};

use crate::NetError;

/// PEM material and fingerprint for one issued certificate.
#[derive(Debug, Clone)]
pub struct CertMaterial {
    pub name: String,
    pub cert_pem: String,
    pub key_pem: String,
    /// SHA-256 of the certificate in DER form.
    pub fingerprint: [u8; 32],
}

/// A deployment-local certificate authority. Every mesh process (trusted
/// nodes, simulated QKD sides, SAE clients) gets a leaf usable for both
/// server and client authentication.
pub struct DevPki {
    ca_cert_pem: String,
    ca_params: CertificateParams,
    ca_key: KeyPair,
    issued: BTreeMap<String, CertMaterial>,
}

impl DevPki {
    pub fn new() -> Result<Self, NetError> {
        let mut params = CertificateParams::new(Vec::<String>::new())
            .map_err(|e| NetError::Pki(e.to_string()))?;
        params.is_ca = IsCa::Ca(BasicConstraints::Unconstrained);
        params
            .distinguished_name
            .push(DnType::CommonName, "keymesh-dev-ca");
        let ca_key = KeyPair::generate().map_err(|e| NetError::Pki(e.to_string()))?;
        let ca_cert = params
            .clone()
            .self_signed(&ca_key)
            .map_err(|e| NetError::Pki(e.to_string()))?;
        Ok(Self {
            ca_cert_pem: ca_cert.pem(),
            ca_params: params,
            ca_key,
            issued: BTreeMap::new(),
        })
    }

    pub fn ca_cert_pem(&self) -> &str {
        &self.ca_cert_pem
    }

    /// Issues (or returns the already-issued) leaf for `name`, valid for the
    /// given hosts plus 127.0.0.1/localhost, usable as both a server and a
    /// client certificate.
    pub fn issue(&mut self, name: &str, hosts: &[&str]) -> Result<&CertMaterial, NetError> {
        if !self.issued.contains_key(name) {
            let mut san: Vec<String> = vec!["localhost".into()];
            for host in hosts {
                if !san.iter().any(|s| s == host) && host.parse::<std::net::IpAddr>().is_err() {
                    san.push(host.to_string());
                }
            }
            let mut params = CertificateParams::new(san)
                .map_err(|e| NetError::Pki(e.to_string()))?;
            params.distinguished_name.push(DnType::CommonName, name);
            params
                .subject_alt_names
                .push(SanType::IpAddress("127.0.0.1".parse().expect("literal")));
            for host in hosts {
                if let Ok(ip) = host.parse::<std::net::IpAddr>() {
                    if ip != std::net::IpAddr::from([127, 0, 0, 1]) {
                        params.subject_alt_names.push(SanType::IpAddress(ip));
                    }
                }
            }
            params.extended_key_usages = vec![
                ExtendedKeyUsagePurpose::ServerAuth,
                ExtendedKeyUsagePurpose::ClientAuth,
            ];
            let key = KeyPair::generate().map_err(|e| NetError::Pki(e.to_string()))?;
            let issuer = Issuer::new(self.ca_params.clone(), &self.ca_key);
            let cert = params
                .signed_by(&key, &issuer)
                .map_err(|e| NetError::Pki(e.to_string()))?;
            let material = CertMaterial {
                name: name.to_string(),
                fingerprint: Sha256::digest(cert.der()).into(),
                cert_pem: cert.pem(),
                key_pem: key.serialize_pem(),
            };
            self.issued.insert(name.to_string(), material);
        }
        Ok(&self.issued[name])
    }

    pub fn issued(&self, name: &str) -> Option<&CertMaterial> {
        self.issued.get(name)
    }

    pub fn all_issued(&self) -> impl Iterator<Item = &CertMaterial> {
        self.issued.values()
    }

    /// Writes `ca.pem` plus `<name>.pem` / `<name>.key` for every leaf.
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), NetError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("ca.pem"), &self.ca_cert_pem)?;
        for material in self.issued.values() {
            fs::write(dir.join(format!("{}.pem", material.name)), &material.cert_pem)?;
            fs::write(dir.join(format!("{}.key", material.name)), &material.key_pem)?;
        }
        Ok(())
    }
}

/// SHA-256 fingerprint of the first certificate in a PEM document.
pub fn fingerprint_cert_pem(cert_pem: &str) -> Result<[u8; 32], NetError> {
    let der = rustls_pemfile::certs(&mut cert_pem.as_bytes())
        .next()
        .ok_or_else(|| NetError::Pki("no certificate in PEM".into()))?
        .map_err(|e| NetError::Pki(e.to_string()))?;
    Ok(Sha256::digest(der.as_ref()).into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn issues_distinct_leaves_with_stable_fingerprints() {
        let mut pki = DevPki::new().unwrap();
        let a = pki.issue("node-a", &["127.0.0.1"]).unwrap().clone();
        let b = pki.issue("node-b", &["127.0.0.1"]).unwrap().clone();
        assert_ne!(a.fingerprint, b.fingerprint);
        // Issuing again returns the same material.
        let again = pki.issue("node-a", &["127.0.0.1"]).unwrap();
        assert_eq!(again.fingerprint, a.fingerprint);
        // PEM fingerprint helper agrees.
        assert_eq!(fingerprint_cert_pem(&a.cert_pem).unwrap(), a.fingerprint);
    }
}
