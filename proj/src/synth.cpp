#include "viref/synth.hpp"

#include <cmath>
#include <filesystem>

namespace fs = std::filesystem;

namespace viref {

namespace {

constexpr int kLatentAttributes = 6;
constexpr int kTrajDim = 4;     // x, y, vx, vy
constexpr int kSummaryDim = 6;  // start, net displacement, mean velocity

struct ProjectionTables {
  std::vector<VecXf> cls;    // one vector per class
  std::vector<VecXf> color;  // one vector per color
  VecXf scene_base;
  MatXf main_mask;     // D x 4
  MatXf context_mask;  // D x 4
  std::array<MatXf, 4> motion;  // D x 6: main, context, pair, scene
};

VecXf draw_vec(Rng& rng, int d, double scale) {
  VecXf v(d);
  for (int i = 0; i < d; ++i) v(i) = float(rng.uniform(-scale, scale));
  return v;
}

MatXf draw_mat(Rng& rng, int rows, int cols, double scale) {
  MatXf m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = float(rng.uniform(-scale, scale));
  return m;
}

ProjectionTables make_tables(const WorldConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, "synth.proj"));
  ProjectionTables t;
  const int d = cfg.feature_dim;
  for (std::size_t i = 0; i < cfg.classes.size(); ++i)
    t.cls.push_back(draw_vec(rng, d, 1.0));
  for (std::size_t i = 0; i < cfg.colors.size(); ++i)
    t.color.push_back(draw_vec(rng, d, 1.0));
  t.scene_base = draw_vec(rng, d, 0.5);
  t.main_mask = draw_mat(rng, d, kTrajDim, 0.6);
  t.context_mask = draw_mat(rng, d, kTrajDim, 0.6);
  for (auto& m : t.motion) m = draw_mat(rng, d, kSummaryDim, 0.6);
  return t;
}

// Clip duration reads as a property of the interaction, so it derives from
// the motion and relation alone; appearance attributes never change the
// frame count.
uint64_t duration_hash(const LatentPair& l) {
  uint64_t h = 0;
  for (int v : {l.main_motion, l.relation})
    h = splitmix64(h ^ uint64_t(v + 1));
  return h;
}

struct Point {
  double x = 0.0, y = 0.0;
};

// Main-object position at normalized time u in [0, 1].
Point main_position(int motion, double u) {
  switch (motion) {
    case 0:  // parked
      return {0.2, 0.1};
    case 1:  // moving
      return {0.2 + u, 0.1 + 0.3 * u};
    case 2:  // turning
      return {0.2 + 0.8 * std::sin(M_PI * u / 2.0),
              0.1 + 0.8 * (1.0 - std::cos(M_PI * u / 2.0))};
    default: {  // extra verbs: straight lines in distinct directions
      const double ang = 0.7 * motion + 0.3;
      const double speed = 0.8 + 0.1 * motion;
      return {0.2 + u * speed * std::cos(ang), 0.1 + u * speed * std::sin(ang)};
    }
  }
}

Point main_velocity(int motion, double u, double du) {
  Point a = main_position(motion, u);
  Point b = main_position(motion, u + du);
  return {(b.x - a.x) / du, (b.y - a.y) / du};
}

// Context position: the relation fixes where the context sits relative to
// the main object ("behind X" means the main trails X, so the context leads).
Point context_position(int relation, const Point& p, const Point& v) {
  double nv = std::hypot(v.x, v.y);
  Point dir = nv > 1e-9 ? Point{v.x / nv, v.y / nv} : Point{1.0, 0.0};
  switch (relation) {
    case 0:  // near
      return {p.x + 0.25, p.y + 0.2};
    case 1:  // behind
      return {p.x + 1.2 * dir.x, p.y + 1.2 * dir.y};
    case 2:  // beside
      return {p.x, p.y + 0.9};
    case 3:  // leading
      return {p.x - 1.2 * dir.x, p.y - 1.2 * dir.y};
    default: {  // extra relations: distinct fixed offsets (golden angle)
      const double ang = 2.39996 * relation;
      const double r = 0.8 + 0.15 * relation;
      return {p.x + r * std::cos(ang), p.y + r * std::sin(ang)};
    }
  }
}

VecXf traj_features(const MatXf& proj, const Point& p, const Point& v) {
  VecXf t(kTrajDim);
  t << float(p.x), float(p.y), float(v.x), float(v.y);
  return proj * t;
}

VecXf summary_features(const MatXf& proj, const std::vector<Point>& pos) {
  const std::size_t m = pos.size();
  VecXf s(kSummaryDim);
  double mvx = 0.0, mvy = 0.0;
  if (m > 1) {
    for (std::size_t i = 0; i + 1 < m; ++i) {
      mvx += pos[i + 1].x - pos[i].x;
      mvy += pos[i + 1].y - pos[i].y;
    }
    mvx /= double(m - 1);
    mvy /= double(m - 1);
  }
  s << float(pos.front().x), float(pos.front().y),
      float(pos.back().x - pos.front().x), float(pos.back().y - pos.front().y),
      float(mvx), float(mvy);
  return proj * s;
}

std::vector<Point> main_track(const LatentPair& l, int m) {
  std::vector<Point> out(m);
  for (int i = 0; i < m; ++i) {
    const double u = m > 1 ? double(i) / double(m - 1) : 0.0;
    out[i] = main_position(l.main_motion, u);
  }
  return out;
}

std::vector<Point> context_track(const LatentPair& l,
                                 const std::vector<Point>& mains, int m) {
  std::vector<Point> out(m);
  for (int i = 0; i < m; ++i) {
    const double u = m > 1 ? double(i) / double(m - 1) : 0.0;
    const double du = m > 1 ? 0.5 / double(m - 1) : 0.5;
    Point v = main_velocity(l.main_motion, u, du);
    out[i] = context_position(l.relation, mains[i], v);
  }
  return out;
}

void add_noise(FeatureData& data, Rng& rng, double std_dev) {
  if (std_dev <= 0.0) return;
  for (auto& v : data.values) v += float(rng.normal() * std_dev);
}

}  // namespace

void WorldConfig::validate() const {
  if (video_count < 1 || pairs_per_video < 1)
    fail(ErrorKind::config, "world: video and pair counts must be positive");
  if (frame_count_min < 1 || frame_count_max < frame_count_min)
    fail(ErrorKind::config, "world: bad frame count range");
  if (classes.empty() || colors.empty() || motions.empty() ||
      relations.empty())
    fail(ErrorKind::config, "world: attribute alphabets must be non-empty");
  if (feature_dim < kLatentAttributes)
    fail(ErrorKind::config,
         "world: feature_dim too small to embed the latent attributes");
  if (noise_std < 0.0)
    fail(ErrorKind::config, "world: noise_std must be >= 0");
}

int synth_frame_count(const LatentPair& l, const WorldConfig& cfg) {
  const int range = cfg.frame_count_max - cfg.frame_count_min + 1;
  return cfg.frame_count_min + int(duration_hash(l) % uint64_t(range));
}

FeatureSequence synth_features(const LatentPair& l, const WorldConfig& cfg) {
  const ProjectionTables t = make_tables(cfg);
  const int m = synth_frame_count(l, cfg);
  const int d = cfg.feature_dim;

  FeatureSequence seq;
  seq.frames = m;
  seq.streams = kFrameStreams;
  seq.dim = d;
  seq.values.resize(std::size_t(m) * kFrameStreams * d);

  const VecXf main_app = t.cls[l.main_class] + t.color[l.main_color];
  const VecXf ctx_app = t.cls[l.context_class] + t.color[l.context_color];
  const VecXf scene = t.scene_base + 0.5f * (main_app + ctx_app);

  const auto mains = main_track(l, m);
  const auto ctxs = context_track(l, mains, m);

  for (int i = 0; i < m; ++i) {
    const double u = m > 1 ? double(i) / double(m - 1) : 0.0;
    const double du = m > 1 ? 0.5 / double(m - 1) : 0.5;
    const Point mv = main_velocity(l.main_motion, u, du);
    const Point cv = i + 1 < m
                         ? Point{(ctxs[i + 1].x - ctxs[i].x) / du,
                                 (ctxs[i + 1].y - ctxs[i].y) / du}
                         : Point{0.0, 0.0};
    Eigen::Map<VecXf>(seq.stream_ptr(i, kMainAppearance), d) = main_app;
    Eigen::Map<VecXf>(seq.stream_ptr(i, kContextAppearance), d) = ctx_app;
    Eigen::Map<VecXf>(seq.stream_ptr(i, kScene), d) = scene;
    Eigen::Map<VecXf>(seq.stream_ptr(i, kMainMask), d) =
        traj_features(t.main_mask, mains[i], mv);
    Eigen::Map<VecXf>(seq.stream_ptr(i, kContextMask), d) =
        traj_features(t.context_mask, ctxs[i], cv);
  }
  return seq;
}

ClipFeatureSet synth_clip_features(const LatentPair& l,
                                   const WorldConfig& cfg) {
  const ProjectionTables t = make_tables(cfg);
  const int m = synth_frame_count(l, cfg);
  const int d = cfg.feature_dim;

  ClipFeatureSet clip;
  clip.frames = 1;
  clip.streams = kClipStreams;
  clip.dim = d;
  clip.values.resize(std::size_t(kClipStreams) * d);

  const VecXf main_app = t.cls[l.main_class] + t.color[l.main_color];
  const VecXf ctx_app = t.cls[l.context_class] + t.color[l.context_color];
  const auto mains = main_track(l, m);
  const auto ctxs = context_track(l, mains, m);
  std::vector<Point> rel(m), mid(m);
  for (int i = 0; i < m; ++i) {
    rel[i] = {ctxs[i].x - mains[i].x, ctxs[i].y - mains[i].y};
    mid[i] = {0.5 * (ctxs[i].x + mains[i].x), 0.5 * (ctxs[i].y + mains[i].y)};
  }

  Eigen::Map<VecXf>(clip.stream_ptr(0, 0), d) = main_app;
  Eigen::Map<VecXf>(clip.stream_ptr(0, 1), d) = ctx_app;
  Eigen::Map<VecXf>(clip.stream_ptr(0, 2), d) =
      summary_features(t.motion[0], mains);
  Eigen::Map<VecXf>(clip.stream_ptr(0, 3), d) =
      summary_features(t.motion[1], ctxs);
  Eigen::Map<VecXf>(clip.stream_ptr(0, 4), d) =
      summary_features(t.motion[2], rel);
  Eigen::Map<VecXf>(clip.stream_ptr(0, 5), d) =
      summary_features(t.motion[3], mid);
  return clip;
}

std::vector<std::string> synth_refexps(const LatentPair& l,
                                       const WorldConfig& cfg) {
  const std::string& mc = cfg.colors[l.main_color];
  const std::string& mk = cfg.classes[l.main_class];
  const std::string& mo = cfg.motions[l.main_motion];
  const std::string& re = cfg.relations[l.relation];
  const std::string& cc = cfg.colors[l.context_color];
  const std::string& ck = cfg.classes[l.context_class];
  return {
      "the " + mc + " " + mk + " " + mo + " " + re + " the " + cc + " " + ck,
      mc + " " + mk + " " + mo + " " + re + " the " + ck,
      "the " + mk + " " + mo + " " + re + " the " + cc + " " + ck,
  };
}

SynthDataset generate_synthetic_dataset(const WorldConfig& cfg) {
  cfg.validate();
  SynthDataset out;
  char buf[64];
  for (int v = 0; v < cfg.video_count; ++v) {
    std::snprintf(buf, sizeof(buf), "vid%03d", v);
    const std::string video_id = buf;
    for (int p = 0; p < cfg.pairs_per_video; ++p) {
      const std::string pair_id =
          video_id + "_p" + std::to_string(p);
      Rng rec_rng(derive_seed(cfg.seed, "synth.rec:" + pair_id));
      LatentPair l;
      l.main_class = int(rec_rng.uniform_int(cfg.classes.size()));
      l.main_color = int(rec_rng.uniform_int(cfg.colors.size()));
      l.main_motion = int(rec_rng.uniform_int(cfg.motions.size()));
      l.context_class = int(rec_rng.uniform_int(cfg.classes.size()));
      l.context_color = int(rec_rng.uniform_int(cfg.colors.size()));
      l.relation = int(rec_rng.uniform_int(cfg.relations.size()));

      FeatureSequence seq = synth_features(l, cfg);
      ClipFeatureSet clip = synth_clip_features(l, cfg);
      add_noise(seq, rec_rng, cfg.noise_std);
      add_noise(clip, rec_rng, cfg.noise_std);

      PairRecord rec;
      rec.video_id = video_id;
      rec.pair_id = pair_id;
      rec.main_then_context = p % 2 == 0;
      rec.frame_count = seq.frames;
      rec.feature_path = "features/" + pair_id + ".vrft";
      rec.clip_feature_path = "features/" + pair_id + "_clip.vrft";
      rec.refexps = synth_refexps(l, cfg);
      out.records.push_back(std::move(rec));
      out.features.push_back(std::move(seq));
      out.clips.push_back(std::move(clip));
      out.latents.push_back(l);
    }
  }

  const std::vector<Split> splits =
      split_dataset(out.records.size(), cfg.split_ratios, cfg.seed);
  std::vector<std::string> train_refexps;
  for (std::size_t i = 0; i < out.records.size(); ++i) {
    out.records[i].split = splits[i];
    if (splits[i] == Split::train)
      for (const auto& r : out.records[i].refexps) train_refexps.push_back(r);
  }
  out.vocab = Vocabulary::build(train_refexps, {});
  return out;
}

void write_synthetic_dataset(const SynthDataset& data,
                             const std::string& out_dir) {
  fs::create_directories(fs::path(out_dir) / "features");
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    write_vrft(data.features[i],
               (fs::path(out_dir) / rec.feature_path).string());
    write_vrft(data.clips[i],
               (fs::path(out_dir) / rec.clip_feature_path).string());
  }
  save_manifest(data.records, (fs::path(out_dir) / "manifest.jsonl").string());
  data.vocab.save((fs::path(out_dir) / "vocab.txt").string());
}

}  // namespace viref
