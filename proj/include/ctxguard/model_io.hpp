#pragma once

// Versioned binary persistence for density models ("DMDL") and detector
// profiles ("DPRF"). All integers little-endian, all reals float64.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ctxguard/common.hpp"
#include "ctxguard/detector.hpp"

namespace ctxguard {

namespace io_detail {

struct Writer {
    std::string buf;

    void raw(const void* p, std::size_t n) {
        buf.append(static_cast<const char*>(p), n);
    }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) { raw(&v, 2); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void f64(double v) { raw(&v, 8); }
    void vec(const VectorXd& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
    }
    void mat(const MatrixXd& m) {  // row-major
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
    }
};

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    explicit Reader(const std::string& b) : buf(b) {}

    void raw(void* p, std::size_t n) {
        if (pos + n > buf.size()) throw IoError("model file truncated");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    std::uint8_t u8() { std::uint8_t v; raw(&v, 1); return v; }
    std::uint16_t u16() { std::uint16_t v; raw(&v, 2); return v; }
    std::uint32_t u32() { std::uint32_t v; raw(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, 8); return v; }
    double f64() { double v; raw(&v, 8); return v; }
    VectorXd vec(Eigen::Index n) {
        VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = f64();
        return v;
    }
    MatrixXd mat(Eigen::Index r, Eigen::Index c) {
        MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = 0; j < c; ++j) m(i, j) = f64();
        return m;
    }
};

inline void write_pca(Writer& w, const PcaTransform& p) {
    w.u32(static_cast<std::uint32_t>(p.input_dim()));
    w.u32(static_cast<std::uint32_t>(p.output_dim()));
    w.u8(p.degenerate ? 1 : 0);
    w.vec(p.mean);
    w.mat(p.components);
    w.vec(p.explained_variance);
}

inline PcaTransform read_pca(Reader& r) {
    PcaTransform p;
    const auto in_dim = r.u32();
    const auto out_dim = r.u32();
    p.degenerate = r.u8() != 0;
    p.mean = r.vec(in_dim);
    p.components = r.mat(out_dim, in_dim);
    p.explained_variance = r.vec(out_dim);
    const MatrixXd gram = p.components * p.components.transpose();
    if ((gram - MatrixXd::Identity(out_dim, out_dim)).cwiseAbs().maxCoeff() > 1e-6)
        throw IoError("model file: PCA components not orthonormal");
    return p;
}

}  // namespace io_detail

inline constexpr char kModelMagic[4] = {'D', 'M', 'D', 'L'};
inline constexpr std::uint16_t kModelVersion = 1;

inline std::string serialize_model(const DensityModel& m) {
    io_detail::Writer w;
    w.raw(kModelMagic, 4);
    w.u16(kModelVersion);
    w.u8(m.kind() == ScoreKind::gmm_loglik ? 0 : 1);
    if (const auto* g = std::get_if<GmmModel>(&m.impl)) {
        io_detail::write_pca(w, g->preprocessing);
        w.u32(static_cast<std::uint32_t>(g->k()));
        w.u32(static_cast<std::uint32_t>(g->dim()));
        for (double wt : g->weights) w.f64(wt);
        for (const auto& mu : g->means) w.vec(mu);
        for (const auto& cov : g->covariances) w.mat(cov);
    } else {
        const auto& o = std::get<OcsvmModel>(m.impl);
        io_detail::write_pca(w, o.preprocessing);
        w.f64(o.gamma);
        w.f64(o.nu);
        w.f64(o.rho);
        w.u32(static_cast<std::uint32_t>(o.support_vectors.rows()));
        w.u32(static_cast<std::uint32_t>(o.support_vectors.cols()));
        w.vec(o.alphas);
        w.mat(o.support_vectors);
    }
    return w.buf;
}

inline DensityModel deserialize_model(const std::string& bytes) {
    io_detail::Reader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kModelMagic, 4) != 0)
        throw IoError("model file: bad magic");
    if (r.u16() != kModelVersion) throw IoError("model file: unknown version");
    const auto kind = r.u8();
    DensityModel m;
    if (kind == 0) {
        GmmModel g;
        g.preprocessing = io_detail::read_pca(r);
        const auto K = r.u32();
        const auto d = r.u32();
        g.weights.resize(K);
        for (auto& wt : g.weights) wt = r.f64();
        g.means.resize(K);
        for (auto& mu : g.means) mu = r.vec(d);
        g.covariances.resize(K);
        double wsum = 0.0;
        for (auto& cov : g.covariances) {
            cov = r.mat(d, d);
            if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9)
                throw IoError("model file: GMM covariance not symmetric");
        }
        for (double wt : g.weights) {
            if (wt < 0) throw IoError("model file: negative GMM weight");
            wsum += wt;
        }
        if (std::abs(wsum - 1.0) > 1e-9)
            throw IoError("model file: GMM weights do not sum to 1");
        g.prepare();  // also validates positive definiteness
        m.impl = std::move(g);
    } else if (kind == 1) {
        OcsvmModel o;
        o.preprocessing = io_detail::read_pca(r);
        o.gamma = r.f64();
        o.nu = r.f64();
        o.rho = r.f64();
        const auto nsv = r.u32();
        const auto d = r.u32();
        o.alphas = r.vec(nsv);
        o.support_vectors = r.mat(nsv, d);
        if (o.gamma <= 0 || o.nu <= 0 || o.nu > 1)
            throw IoError("model file: OCSVM parameters out of range");
        double asum = 0.0;
        for (Eigen::Index i = 0; i < o.alphas.size(); ++i) {
            if (o.alphas(i) <= 0) throw IoError("model file: non-positive alpha");
            asum += o.alphas(i);
        }
        if (std::abs(asum - 1.0) > 1e-6)
            throw IoError("model file: OCSVM alphas do not sum to 1");
        o.prepare();
        m.impl = std::move(o);
    } else {
        throw IoError("model file: unknown estimator kind tag");
    }
    return m;
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());
    return bytes;
}

inline void save_model(const DensityModel& m, const std::string& path) {
    write_file(path, serialize_model(m));
}

inline DensityModel load_model(const std::string& path) {
    return deserialize_model(read_file(path));
}

inline constexpr char kProfileMagic[4] = {'D', 'P', 'R', 'F'};

inline std::string serialize_profile(const DetectorProfile& p) {
    p.check();
    io_detail::Writer w;
    w.raw(kProfileMagic, 4);
    w.u16(kModelVersion);
    // uncalibrated thresholds are -infinity, which JSON cannot carry as a
    // number; null means "gate open"
    auto theta_json = [](double v) {
        return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    };
    nlohmann::json meta{{"tau", p.tau},
                        {"theta_s", theta_json(p.theta_s)},
                        {"theta_u", theta_json(p.theta_u)},
                        {"estimator", to_string(p.estimator)},
                        {"variant", to_string(p.variant)},
                        {"percentile", p.provenance.percentile},
                        {"safe_dataset", p.provenance.safe_dataset},
                        {"unsafe_dataset", p.provenance.unsafe_dataset}};
    const std::string mj = meta.dump();
    w.u32(static_cast<std::uint32_t>(mj.size()));
    w.raw(mj.data(), mj.size());
    const std::string sm = serialize_model(p.safe_model);
    const std::string um = serialize_model(p.unsafe_model);
    w.u64(sm.size());
    w.raw(sm.data(), sm.size());
    w.u64(um.size());
    w.raw(um.data(), um.size());
    return w.buf;
}

inline DetectorProfile deserialize_profile(const std::string& bytes) {
    io_detail::Reader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kProfileMagic, 4) != 0)
        throw IoError("profile file: bad magic");
    if (r.u16() != kModelVersion) throw IoError("profile file: unknown version");
    const auto mlen = r.u32();
    std::string mj(mlen, '\0');
    r.raw(mj.data(), mlen);
    nlohmann::json meta = nlohmann::json::parse(mj);

    DetectorProfile p;
    p.tau = meta.at("tau").get<double>();
    auto theta_value = [](const nlohmann::json& v) {
        return v.is_null() ? -std::numeric_limits<double>::infinity()
                           : v.get<double>();
    };
    p.theta_s = theta_value(meta.at("theta_s"));
    p.theta_u = theta_value(meta.at("theta_u"));
    p.estimator = score_kind_from_string(meta.at("estimator").get<std::string>());
    p.variant = safe_variant_from_string(meta.at("variant").get<std::string>());
    p.provenance.percentile = meta.value("percentile", 5.0);
    p.provenance.safe_dataset = meta.value("safe_dataset", "");
    p.provenance.unsafe_dataset = meta.value("unsafe_dataset", "");

    const auto slen = r.u64();
    std::string sm(slen, '\0');
    r.raw(sm.data(), slen);
    const auto ulen = r.u64();
    std::string um(ulen, '\0');
    r.raw(um.data(), ulen);
    p.safe_model = deserialize_model(sm);
    p.unsafe_model = deserialize_model(um);
    p.check();
    return p;
}

inline void save_profile(const DetectorProfile& p, const std::string& path) {
    write_file(path, serialize_profile(p));
}

inline DetectorProfile load_profile(const std::string& path) {
    return deserialize_profile(read_file(path));
}

}  // namespace ctxguard
