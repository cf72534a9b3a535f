#include "forkpath/synthetic.hpp"

#include <cmath>
#include <random>

#include "forkpath/error.hpp"

namespace forkpath::synthetic {

using datapanel::Cell;
using datapanel::DataPanel;
using datapanel::Frequency;
using datapanel::Series;

namespace {

std::int64_t add_months(std::int64_t yyyymm, std::size_t k) {
    const long y = yyyymm / 100, m = yyyymm % 100 - 1;
    const long t = y * 12 + m + static_cast<long>(k);
    return (t / 12) * 100 + t % 12 + 1;
}

}  // namespace

DataPanel macro_panel(const MacroOptions& opt) {
    if (opt.months < 24) throw DomainError("macro panel needs at least 24 months");
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    const std::size_t T = opt.months;

    std::vector<double> s(T);
    s[0] = g(rng) / std::sqrt(1 - opt.persistence * opt.persistence);
    for (std::size_t t = 1; t < T; ++t) s[t] = opt.persistence * s[t - 1] + g(rng);
    double m = 0, v = 0;
    for (double x : s) m += x;
    m /= static_cast<double>(T);
    for (double x : s) v += (x - m) * (x - m);
    const double sd = std::sqrt(v / static_cast<double>(T));
    std::vector<double> z(T);
    for (std::size_t t = 0; t < T; ++t) z[t] = (s[t] - m) / sd;

    std::vector<double> premium(T);
    premium[0] = opt.noise_sd * g(rng);
    for (std::size_t t = 1; t < T; ++t) premium[t] = 0.5 + opt.beta * z[t - 1] + opt.noise_sd * g(rng);

    auto predictor = [&](double scale, double shift) {
        std::vector<double> p(T);
        for (std::size_t t = 0; t < T; ++t) p[t] = shift + scale * (z[t] + opt.idiosyncratic * g(rng));
        return p;
    };
    const auto payout = predictor(0.3, -0.8);
    const auto bm = predictor(0.15, 0.6);
    const auto svar = predictor(0.002, 0.01);
    const auto dfr = predictor(0.01, 0.0);
    const auto dfy = predictor(0.3, 1.0);
    const auto ntis = predictor(0.02, 0.01);

    auto with_gaps = [&](const std::vector<double>& x, std::size_t leading) {
        Series c(T);
        for (std::size_t t = 0; t < T; ++t)
            if (t >= leading && (t < leading + 2 || u(rng) >= opt.missing_rate)) c[t] = x[t];
        return c;
    };
    Series spvw(T), rfree(T), d12(T), e12(T), baa(T), aaa(T), corpr(T), ltr(T);
    for (std::size_t t = 0; t < T; ++t) {
        rfree[t] = 0.3;
        spvw[t] = premium[t] + 0.3;
        e12[t] = 10.0;
        d12[t] = 10.0 * std::exp(payout[t]);
        aaa[t] = 5.0;
        baa[t] = 5.0 + dfy[t];
        ltr[t] = 0.5;
        corpr[t] = 0.5 + dfr[t];
    }
    std::vector<std::int64_t> dates(T);
    for (std::size_t t = 0; t < T; ++t) dates[t] = add_months(opt.first_month, t) * 100;
    return DataPanel(Frequency::monthly, std::move(dates),
                     {{"CRSP_SPvw", spvw},
                      {"Rfree", rfree},
                      {"D12", d12},
                      {"E12", e12},
                      {"b/m", with_gaps(bm, 0)},
                      {"ntis", with_gaps(ntis, opt.leading_missing)},
                      {"svar", with_gaps(svar, opt.leading_missing)},
                      {"BAA", baa},
                      {"AAA", aaa},
                      {"corpr", corpr},
                      {"ltr", ltr}});
}

std::vector<std::string> characteristic_names(std::size_t count) {
    std::vector<std::string> n;
    for (std::size_t k = 0; k < count; ++k) n.push_back("c" + std::to_string(k + 1));
    return n;
}

datapanel::LongPanel stock_panel(const StockOptions& opt) {
    if (opt.stocks < 10 || opt.months < 3) throw DomainError("stock panel too small");
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    const std::size_t S = opt.stocks, T = opt.months, K = opt.characteristics;

    std::vector<double> lambda(K), tilt(K);
    for (std::size_t k = 0; k < K; ++k) {
        lambda[k] = opt.base_signal + opt.signal_sd * g(rng);
        tilt[k] = opt.size_tilt * g(rng);
    }
    std::vector<double> size(S), vol(S);
    for (std::size_t s = 0; s < S; ++s) {
        size[s] = g(rng);
        vol[s] = opt.ret_sd * std::exp(0.3 * g(rng));
    }
    const double phi = 0.9;
    std::vector<double> c(S * K);
    for (auto& x : c) x = g(rng);

    datapanel::LongPanel p;
    p.names = {"ret", "mvel1", "retvol"};
    for (const auto& n : characteristic_names(K)) p.names.push_back(n);
    p.columns.resize(p.names.size());
    std::vector<double> prev_c = c;
    for (std::size_t t = 0; t < T; ++t) {
        const std::int64_t date = add_months(opt.first_month, t) * 100;
        for (std::size_t s = 0; s < S; ++s) {
            // return over month t loads on characteristics observed at t-1
            const double zsize = size[s] - 0.25 * (vol[s] / opt.ret_sd - 1.0);
            double mu = 0.005;
            for (std::size_t k = 0; k < K; ++k) mu += (lambda[k] + tilt[k] * zsize) * prev_c[s * K + k];
            const double r = t == 0 ? vol[s] * g(rng) : mu + vol[s] * g(rng);
            size[s] += 0.05 * r + 0.02 * g(rng);
            p.ids.push_back(static_cast<std::int64_t>(10000 + s));
            p.dates.push_back(date);
            p.columns[0].push_back(t == 0 ? Cell() : Cell(r));
            p.columns[1].push_back(std::exp(3.0 + size[s]));
            p.columns[2].push_back(vol[s] * std::exp(0.1 * g(rng)));
            for (std::size_t k = 0; k < K; ++k) {
                const double x = c[s * K + k];
                p.columns[3 + k].push_back(u(rng) < opt.missing_rate ? Cell() : Cell(x));
            }
        }
        prev_c = c;
        for (auto& x : c) x = phi * x + std::sqrt(1 - phi * phi) * g(rng);
    }
    return p;
}

FactorEconomy factor_economy(const FactorOptions& opt) {
    if (opt.premia.size() != 5) throw DomainError("factor economy needs 5 factor premia");
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> g;
    const std::size_t N = opt.assets, T = opt.months, D = opt.days_per_month;
    const std::vector<std::string> fnames{"MKT", "SMB", "HML", "RMW", "CMA"};

    FactorEconomy e;
    e.loadings.resize(static_cast<long>(N), 5);
    for (std::size_t n = 0; n < N; ++n) {
        e.loadings(static_cast<long>(n), 0) = 1.0 + 0.3 * g(rng);
        for (int f = 1; f < 5; ++f) e.loadings(static_cast<long>(n), f) = 0.6 * g(rng);
    }
    const double dd = static_cast<double>(D);
    std::vector<std::int64_t> mdates, ddates;
    std::vector<Series> fm(6), fd(6), am(N), ad(N);
    for (std::size_t t = 0; t < T; ++t) {
        const std::int64_t ym = add_months(opt.first_month, t);
        mdates.push_back(ym * 100);
        std::vector<double> fsum(5, 0.0), asum(N, 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            ddates.push_back(ym * 100 + static_cast<std::int64_t>(d + 1));
            std::vector<double> f(5);
            for (int k = 0; k < 5; ++k) {
                f[k] = opt.premia[k] / dd + opt.factor_sd / std::sqrt(dd) * g(rng);
                fsum[k] += f[k];
                fd[k].push_back(f[k]);
            }
            fd[5].push_back(opt.rf / dd);
            for (std::size_t n = 0; n < N; ++n) {
                double r = opt.rf / dd + opt.idio_sd / std::sqrt(dd) * g(rng);
                for (int k = 0; k < 5; ++k) r += e.loadings(static_cast<long>(n), k) * f[k];
                asum[n] += r;
                ad[n].push_back(r);
            }
        }
        for (int k = 0; k < 5; ++k) fm[k].push_back(fsum[k]);
        fm[5].push_back(opt.rf);
        for (std::size_t n = 0; n < N; ++n) am[n].push_back(asum[n]);
    }
    auto cols = [&](std::vector<Series>& f) {
        std::vector<std::pair<std::string, Series>> c;
        for (int k = 0; k < 5; ++k) c.emplace_back(fnames[k], f[k]);
        c.emplace_back("RF", f[5]);
        return c;
    };
    auto acols = [&](std::vector<Series>& a) {
        std::vector<std::pair<std::string, Series>> c;
        for (std::size_t n = 0; n < N; ++n) c.emplace_back("A" + std::to_string(n + 1), a[n]);
        return c;
    };
    e.factors_monthly = DataPanel(Frequency::monthly, mdates, cols(fm));
    e.factors_daily = DataPanel(Frequency::daily, ddates, cols(fd));
    e.assets_monthly = DataPanel(Frequency::monthly, mdates, acols(am));
    e.assets_daily = DataPanel(Frequency::daily, ddates, acols(ad));
    return e;
}

}  // namespace forkpath::synthetic
