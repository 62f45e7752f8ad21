/**
 * EEGNet-style regression network for 2-D kinematic targets.
 *
 * Block 1 learns temporal filters with a long (1 x 64) convolution and a
 * depthwise convolution spanning the full channel axis; block 2 refines
 * temporally with a separable convolution. An adaptive (global) average
 * pool collapses the remaining time axis to one F2-length vector per
 * window, and a dense head maps it to (vx, vy). Trained with MSE and
 * Adam.
 */

import * as tf from "@tensorflow/tfjs";

export interface EEGNetConfig {
  temporalFilters: number; // F1
  kernelLength: number;
  depthMultiplier: number; // D
  separableFilters: number; // F2
  pool1: number;
  dropout: number;
  learningRate: number;
  weightDecay: number;
  batchSize: number;
  epochs: number;
}

export const DEFAULT_CONFIG: EEGNetConfig = {
  temporalFilters: 8,
  kernelLength: 64,
  depthMultiplier: 2,
  separableFilters: 16,
  pool1: 4,
  dropout: 0.25,
  learningRate: 0.001,
  weightDecay: 0.0,
  batchSize: 128,
  epochs: 20,
};

/**
 * Expected trainable parameter count for a given channel count; the
 * architecture makes it independent of window length.
 */
export function expectedTrainableParams(
  channels: number,
  cfg: EEGNetConfig = DEFAULT_CONFIG
): number {
  const f1 = cfg.temporalFilters;
  const f2 = cfg.separableFilters;
  const fd = f1 * cfg.depthMultiplier;
  const conv1 = f1 * cfg.kernelLength; // (1,kern), 1 input map, no bias
  const bn1 = 2 * f1;
  const depthwise = channels * f1 * cfg.depthMultiplier;
  const bn2 = 2 * fd;
  const sepDepthwise = 16 * fd; // (1,16) per input map
  const sepPointwise = fd * f2;
  const bn3 = 2 * f2;
  const dense = f2 * 2 + 2;
  return conv1 + bn1 + depthwise + bn2 + sepDepthwise + sepPointwise + bn3 + dense;
}

export function buildModel(
  channels: number,
  windowLen: number,
  cfg: EEGNetConfig = DEFAULT_CONFIG,
  seed = 0
): tf.LayersModel {
  const init = (offset: number) => tf.initializers.glorotUniform({ seed: seed + offset });
  const model = tf.sequential();
  model.add(
    tf.layers.conv2d({
      inputShape: [channels, windowLen, 1],
      filters: cfg.temporalFilters,
      kernelSize: [1, cfg.kernelLength],
      padding: "same",
      useBias: false,
      kernelInitializer: init(1),
    })
  );
  model.add(tf.layers.batchNormalization());
  model.add(
    tf.layers.depthwiseConv2d({
      kernelSize: [channels, 1],
      depthMultiplier: cfg.depthMultiplier,
      padding: "valid",
      useBias: false,
      depthwiseInitializer: init(2),
    })
  );
  model.add(tf.layers.batchNormalization());
  model.add(tf.layers.elu());
  model.add(tf.layers.avgPooling2d({ poolSize: [1, cfg.pool1] }));
  model.add(tf.layers.dropout({ rate: cfg.dropout, seed: seed + 3 }));
  model.add(
    tf.layers.separableConv2d({
      filters: cfg.separableFilters,
      kernelSize: [1, 16],
      padding: "same",
      useBias: false,
      depthwiseInitializer: init(4),
      pointwiseInitializer: init(5),
    })
  );
  model.add(tf.layers.batchNormalization());
  model.add(tf.layers.elu());
  // pool2, adaptive: collapse whatever time axis remains to one vector
  model.add(tf.layers.globalAveragePooling2d({ dataFormat: "channelsLast" }));
  model.add(tf.layers.dropout({ rate: cfg.dropout, seed: seed + 6 }));
  model.add(tf.layers.dense({ units: 2, kernelInitializer: init(7) }));
  model.compile({
    optimizer: tf.train.adam(cfg.learningRate),
    loss: "meanSquaredError",
  });
  return model;
}

/** Raw windows (N,1,C,L) flattened -> NHWC tensor [N, C, L, 1]. */
export function windowsToTensor(
  xRaw: Float32Array,
  n: number,
  channels: number,
  windowLen: number
): tf.Tensor4D {
  return tf.tensor4d(xRaw, [n, 1, channels, windowLen]).transpose([0, 2, 3, 1]) as tf.Tensor4D;
}

export interface TrainResult {
  model: tf.LayersModel;
  epochLosses: number[];
}

export async function trainModel(
  x: tf.Tensor4D,
  y: tf.Tensor2D,
  cfg: EEGNetConfig = DEFAULT_CONFIG,
  seed = 0
): Promise<TrainResult> {
  const [, channels, windowLen] = x.shape;
  const model = buildModel(channels, windowLen, cfg, seed);
  const history = await model.fit(x, y, {
    batchSize: cfg.batchSize,
    epochs: cfg.epochs,
    shuffle: false,
    verbose: 0,
  });
  const epochLosses = (history.history.loss as number[]).map(Number);
  return { model, epochLosses };
}

/** Deterministic inference (dropout off) returning an N x 2 array. */
export function predict(model: tf.LayersModel, x: tf.Tensor4D): Float64Array {
  const out = model.predict(x, { batchSize: 256 }) as tf.Tensor;
  const data = out.dataSync();
  const result = new Float64Array(data.length);
  result.set(data);
  out.dispose();
  return result;
}
