use ndarray::{s, Array2, ArrayView2, Axis};

use super::{Architecture, SpeakerTable};
use crate::error::{Error, Result};
use crate::nn::{backward, forward, init_parameters, Activation, NetworkSpec, ParamSet, Parameters, Real};

/// Correspondence autoencoder: encoder to a linear bottleneck, decoder back to the input
/// dimension, optionally conditioned on the output speaker.
#[derive(Clone, Debug, PartialEq)]
pub struct Cae<F> {
    pub encoder_spec: NetworkSpec,
    pub encoder: Parameters<F>,
    pub decoder_spec: NetworkSpec,
    pub decoder: Parameters<F>,
    pub speakers: Option<SpeakerTable<F>>,
}

/// Activations kept from a forward pass for the backward pass.
pub(crate) struct CaeTape<F> {
    pub encoder: Vec<Array2<F>>,
    pub decoder: Vec<Array2<F>>,
}

impl<F: Real> CaeTape<F> {
    pub fn bottleneck(&self) -> &Array2<F> {
        self.encoder.last().expect("encoder has layers")
    }

    pub fn output(&self) -> &Array2<F> {
        self.decoder.last().expect("decoder has layers")
    }

    /// Sides of the ReLU kinks in both networks.
    pub fn relu_pattern(&self, cae: &Cae<F>, out: &mut Vec<bool>) {
        relu_pattern(&cae.encoder_spec, &self.encoder, out);
        relu_pattern(&cae.decoder_spec, &self.decoder, out);
    }
}

pub(crate) fn relu_pattern<F: Real>(spec: &NetworkSpec, acts: &[Array2<F>], out: &mut Vec<bool>) {
    for (act, a) in spec.activations.iter().zip(&acts[1..]) {
        if *act == Activation::Relu {
            out.extend(a.iter().map(|&v| v > F::zero()));
        }
    }
}

impl<F: Real> Cae<F> {
    /// Speaker conditioning is enabled when `speakers` is given; the table then holds one
    /// vector per listed speaker.
    pub fn new(input_dim: usize, arch: &Architecture, speakers: Option<Vec<String>>, seed: u64) -> Result<Self> {
        let encoder_spec = NetworkSpec::mlp(
            input_dim,
            arch.hidden_units,
            arch.hidden_layers,
            arch.embedding_dim,
            Activation::Linear,
            seed,
        );
        let speakers = match speakers {
            Some(names) if names.is_empty() => return Err(Error::Empty("speaker table")),
            Some(names) => Some(SpeakerTable::new(names, arch.speaker_dim, seed.wrapping_add(2))),
            None => None,
        };
        let extra = speakers.as_ref().map_or(0, |t| t.dim());
        let decoder_spec = NetworkSpec::mlp(
            arch.embedding_dim + extra,
            arch.hidden_units,
            arch.hidden_layers,
            input_dim,
            Activation::Linear,
            seed.wrapping_add(1),
        );
        Ok(Cae {
            encoder: init_parameters(&encoder_spec)?,
            encoder_spec,
            decoder: init_parameters(&decoder_spec)?,
            decoder_spec,
            speakers,
        })
    }

    pub fn conditioned(&self) -> bool {
        self.speakers.is_some()
    }

    pub fn zeros_like(&self) -> Self {
        Cae {
            encoder_spec: self.encoder_spec.clone(),
            encoder: Parameters::zeros(&self.encoder_spec),
            decoder_spec: self.decoder_spec.clone(),
            decoder: Parameters::zeros(&self.decoder_spec),
            speakers: self.speakers.as_ref().map(SpeakerTable::zeros_like),
        }
    }

    pub fn cast<G: Real>(&self) -> Cae<G> {
        Cae {
            encoder_spec: self.encoder_spec.clone(),
            encoder: self.encoder.cast(),
            decoder_spec: self.decoder_spec.clone(),
            decoder: self.decoder.cast(),
            speakers: self.speakers.as_ref().map(SpeakerTable::cast),
        }
    }

    fn check_speakers(&self, rows: usize, speakers: Option<&[usize]>) -> Result<()> {
        match (&self.speakers, speakers) {
            (None, None) => Ok(()),
            (Some(table), Some(idx)) => {
                if idx.len() != rows {
                    return Err(Error::invalid("one output speaker per item is required"));
                }
                match idx.iter().find(|&&i| i >= table.names.len()) {
                    Some(&i) => Err(Error::UnknownSpeaker(format!("#{i}"))),
                    None => Ok(()),
                }
            }
            (Some(_), None) => Err(Error::invalid("speaker-conditioned model needs output speakers")),
            (None, Some(_)) => Err(Error::invalid("model is not speaker-conditioned")),
        }
    }

    pub(crate) fn run(&self, input: ArrayView2<'_, F>, speakers: Option<&[usize]>) -> Result<CaeTape<F>> {
        self.check_speakers(input.nrows(), speakers)?;
        let encoder = forward(&self.encoder, &self.encoder_spec, input)?;
        let code = encoder.last().expect("encoder has layers");
        let decoder = match (&self.speakers, speakers) {
            (Some(table), Some(idx)) => {
                let spk = table.vectors.select(Axis(0), idx);
                let joined = ndarray::concatenate(Axis(1), &[code.view(), spk.view()])
                    .map_err(|e| Error::invalid(format!("decoder input: {e}")))?;
                forward(&self.decoder, &self.decoder_spec, joined.view())?
            }
            _ => forward(&self.decoder, &self.decoder_spec, code.view())?,
        };
        Ok(CaeTape { encoder, decoder })
    }

    /// Gradients from `output_grad` (dL/dx_hat) plus an optional extra gradient arriving at
    /// the bottleneck.
    pub(crate) fn backprop(
        &self,
        tape: &CaeTape<F>,
        output_grad: ArrayView2<'_, F>,
        code_grad: Option<ArrayView2<'_, F>>,
        speakers: Option<&[usize]>,
    ) -> Result<Cae<F>> {
        let dec = backward(&self.decoder, &self.decoder_spec, &tape.decoder, output_grad)?;
        let k = self.encoder_spec.output_dim();
        let mut to_code = dec.input_grad.slice(s![.., ..k]).to_owned();
        if let Some(extra) = code_grad {
            to_code += &extra;
        }
        let enc = backward(&self.encoder, &self.encoder_spec, &tape.encoder, to_code.view())?;
        let speaker_grads = match (&self.speakers, speakers) {
            (Some(table), Some(idx)) => {
                let mut g = table.zeros_like();
                let from_dec = dec.input_grad.slice(s![.., k..]);
                for (row, &i) in from_dec.outer_iter().zip(idx) {
                    let mut target = g.vectors.row_mut(i);
                    target += &row;
                }
                Some(g)
            }
            _ => None,
        };
        Ok(Cae {
            encoder_spec: self.encoder_spec.clone(),
            encoder: enc.grads,
            decoder_spec: self.decoder_spec.clone(),
            decoder: dec.grads,
            speakers: speaker_grads,
        })
    }

    /// Mean squared-reconstruction loss over the batch and its gradient.
    pub(crate) fn loss_and_grad(
        &self,
        input: ArrayView2<'_, F>,
        target: ArrayView2<'_, F>,
        speakers: Option<&[usize]>,
    ) -> Result<(F, Cae<F>)> {
        let b = input.nrows();
        if b == 0 {
            return Err(Error::Empty("batch"));
        }
        if target.dim() != (b, self.decoder_spec.output_dim()) {
            return Err(Error::DimMismatch {
                expected: self.decoder_spec.output_dim(),
                got: target.ncols(),
            });
        }
        let tape = self.run(input, speakers)?;
        let diff = tape.output() - &target;
        let scale = F::one() / F::lit(b as f64);
        let loss = diff.iter().map(|&d| d * d).sum::<F>() * scale;
        let grad = diff * (F::lit(2.0) * scale);
        let grads = self.backprop(&tape, grad.view(), None, speakers)?;
        Ok((loss, grads))
    }

    pub(crate) fn kink_pattern(&self, input: ArrayView2<'_, F>, speakers: Option<&[usize]>) -> Result<Vec<bool>> {
        let tape = self.run(input, speakers)?;
        let mut out = Vec::new();
        tape.relu_pattern(self, &mut out);
        Ok(out)
    }

    pub(crate) fn tensors(&self) -> Vec<&[F]> {
        let mut t = self.encoder.tensors();
        t.extend(self.decoder.tensors());
        if let Some(table) = &self.speakers {
            t.push(table.vectors.as_slice().expect("standard layout"));
        }
        t
    }

    pub(crate) fn tensors_mut(&mut self) -> Vec<&mut [F]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.decoder.tensors_mut());
        if let Some(table) = &mut self.speakers {
            t.push(table.vectors.as_slice_mut().expect("standard layout"));
        }
        t
    }
}

/// `|x_hat - x_b|^2` for a single frame pair, `x_hat` being the reconstruction of `x_a`.
///
/// `out_speaker` names the speaker of `x_b` and is required exactly when the model is
/// speaker-conditioned.
pub fn cae_loss(model: &Cae<f64>, x_a: &[f64], x_b: &[f64], out_speaker: Option<&str>) -> Result<f64> {
    let idx = match (&model.speakers, out_speaker) {
        (Some(table), Some(name)) => Some(vec![table.index_of(name)?]),
        (None, None) => None,
        (Some(_), None) => return Err(Error::invalid("speaker-conditioned model needs an output speaker")),
        (None, Some(_)) => return Err(Error::invalid("model is not speaker-conditioned")),
    };
    let x = ArrayView2::from_shape((1, x_a.len()), x_a).map_err(|e| Error::invalid(e.to_string()))?;
    let tape = model.run(x, idx.as_deref())?;
    if x_b.len() != tape.output().ncols() {
        return Err(Error::DimMismatch {
            expected: tape.output().ncols(),
            got: x_b.len(),
        });
    }
    Ok(super::reconstruction_loss(tape.output().as_slice().expect("row"), x_b))
}
