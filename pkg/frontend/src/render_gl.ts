/** WebGL2 renderer: N concentric textured sphere meshes, drawn back to
 * front (outermost first) with premultiplied over blending.
 *
 * Fragments look up the layer texture by the spherical coordinates of the
 * surface point itself, which is exactly the ray-sphere sample the CPU
 * reference computes; mesh resolution only affects how finely the sphere
 * silhouette is approximated, not the texture mapping.
 */

import { cameraRotation, type CameraState } from "./camera.js";
import type { MsiBundle } from "./types.js";

const VERT = `#version 300 es
precision highp float;
layout(location = 0) in vec3 aUnit;
uniform float uRadius;
uniform vec3 uEye;
uniform mat3 uRotT;   // transpose of camera rotation (rig -> camera)
uniform vec2 uProj;   // x: focal scale, y: aspect
out vec3 vPos;
void main() {
  vec3 world = aUnit * uRadius;
  vPos = world;
  vec3 cam = uRotT * (world - uEye);
  // +z forward -> clip space; ndc z = 1 - 0.002/z stays in [-1, 1) for any
  // sphere radius, so arbitrarily far layers never clip
  gl_Position = vec4(cam.x * uProj.x, cam.y * uProj.x * uProj.y, cam.z - 0.002, cam.z);
}`;

const FRAG = `#version 300 es
precision highp float;
in vec3 vPos;
uniform sampler2D uTex;
uniform int uInspect;   // 0: composite, 1: alpha grayscale
out vec4 oColor;
const float PI = 3.141592653589793;
void main() {
  vec3 n = normalize(vPos);
  float lon = atan(n.x, n.z);
  float lat = asin(clamp(n.y, -1.0, 1.0));
  vec2 uv = vec2((lon + PI) / (2.0 * PI), (PI * 0.5 - lat) / PI);
  vec4 texel = texture(uTex, uv);
  if (uInspect == 1) {
    oColor = vec4(vec3(texel.a), 1.0);
  } else {
    oColor = vec4(texel.rgb * texel.a, texel.a); // premultiply for over blend
  }
}`;

function compile(gl: WebGL2RenderingContext, kind: number, src: string): WebGLShader {
  const shader = gl.createShader(kind)!;
  gl.shaderSource(shader, src);
  gl.compileShader(shader);
  if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
    throw new Error("shader compile failed: " + gl.getShaderInfoLog(shader));
  }
  return shader;
}

function sphereMesh(lonSegments: number, latSegments: number) {
  const positions: number[] = [];
  const indices: number[] = [];
  for (let j = 0; j <= latSegments; j++) {
    const lat = Math.PI / 2 - (j / latSegments) * Math.PI;
    for (let i = 0; i <= lonSegments; i++) {
      const lon = (i / lonSegments) * 2 * Math.PI - Math.PI;
      positions.push(Math.cos(lat) * Math.sin(lon), Math.sin(lat), Math.cos(lat) * Math.cos(lon));
    }
  }
  const stride = lonSegments + 1;
  for (let j = 0; j < latSegments; j++) {
    for (let i = 0; i < lonSegments; i++) {
      const a = j * stride + i;
      indices.push(a, a + 1, a + stride, a + 1, a + stride + 1, a + stride);
    }
  }
  return { positions: new Float32Array(positions), indices: new Uint32Array(indices) };
}

export class GlRenderer {
  private gl: WebGL2RenderingContext;
  private program: WebGLProgram;
  private vao: WebGLVertexArrayObject;
  private indexCount: number;
  private textures: WebGLTexture[] = [];
  private radii: number[] = [];
  private uniforms: Record<string, WebGLUniformLocation | null> = {};

  constructor(gl: WebGL2RenderingContext) {
    this.gl = gl;
    const program = gl.createProgram()!;
    gl.attachShader(program, compile(gl, gl.VERTEX_SHADER, VERT));
    gl.attachShader(program, compile(gl, gl.FRAGMENT_SHADER, FRAG));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error("program link failed: " + gl.getProgramInfoLog(program));
    }
    this.program = program;
    for (const name of ["uRadius", "uEye", "uRotT", "uProj", "uTex", "uInspect"]) {
      this.uniforms[name] = gl.getUniformLocation(program, name);
    }

    const mesh = sphereMesh(96, 48);
    this.indexCount = mesh.indices.length;
    this.vao = gl.createVertexArray()!;
    gl.bindVertexArray(this.vao);
    const vbo = gl.createBuffer();
    gl.bindBuffer(gl.ARRAY_BUFFER, vbo);
    gl.bufferData(gl.ARRAY_BUFFER, mesh.positions, gl.STATIC_DRAW);
    gl.enableVertexAttribArray(0);
    gl.vertexAttribPointer(0, 3, gl.FLOAT, false, 0, 0);
    const ibo = gl.createBuffer();
    gl.bindBuffer(gl.ELEMENT_ARRAY_BUFFER, ibo);
    gl.bufferData(gl.ELEMENT_ARRAY_BUFFER, mesh.indices, gl.STATIC_DRAW);
    gl.bindVertexArray(null);
  }

  setBundle(bundle: MsiBundle): void {
    const gl = this.gl;
    for (const tex of this.textures) gl.deleteTexture(tex);
    this.textures = [];
    this.radii = bundle.manifest.radii_m.slice();
    const { width, height } = bundle.manifest;
    for (const layer of bundle.layers) {
      const bytes = new Uint8Array(layer.length);
      for (let i = 0; i < layer.length; i++) {
        bytes[i] = Math.round(layer[i] * 255);
      }
      const tex = gl.createTexture()!;
      gl.bindTexture(gl.TEXTURE_2D, tex);
      gl.texImage2D(gl.TEXTURE_2D, 0, gl.RGBA8, width, height, 0, gl.RGBA, gl.UNSIGNED_BYTE, bytes);
      gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MIN_FILTER, gl.LINEAR);
      gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_MAG_FILTER, gl.LINEAR);
      gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_S, gl.REPEAT);
      gl.texParameteri(gl.TEXTURE_2D, gl.TEXTURE_WRAP_T, gl.CLAMP_TO_EDGE);
      this.textures.push(tex);
    }
  }

  /** Draw one frame; inspectLayer switches to single-layer alpha view. */
  render(camera: CameraState, width: number, height: number, inspectLayer?: number): void {
    const gl = this.gl;
    gl.viewport(0, 0, width, height);
    gl.clearColor(0, 0, 0, 1);
    gl.clear(gl.COLOR_BUFFER_BIT);
    gl.disable(gl.DEPTH_TEST);
    gl.disable(gl.CULL_FACE);
    gl.enable(gl.BLEND);
    gl.blendFunc(gl.ONE, gl.ONE_MINUS_SRC_ALPHA);

    gl.useProgram(this.program);
    gl.bindVertexArray(this.vao);
    const rot = cameraRotation(camera);
    // transpose: rows of R become columns -> rig-to-camera
    const rotT = new Float32Array([
      rot[0], rot[3], rot[6],
      rot[1], rot[4], rot[7],
      rot[2], rot[5], rot[8],
    ]);
    gl.uniformMatrix3fv(this.uniforms["uRotT"], false, rotT);
    gl.uniform3f(this.uniforms["uEye"], camera.x, camera.y, camera.z);
    const focal = 1 / Math.tan(camera.fov / 2);
    gl.uniform2f(this.uniforms["uProj"], focal, width / height);
    gl.uniform1i(this.uniforms["uTex"], 0);
    gl.activeTexture(gl.TEXTURE0);

    const order = inspectLayer === undefined
      ? this.radii.map((_, i) => i).reverse()
      : [inspectLayer];
    gl.uniform1i(this.uniforms["uInspect"], inspectLayer === undefined ? 0 : 1);
    for (const i of order) {
      gl.bindTexture(gl.TEXTURE_2D, this.textures[i]);
      gl.uniform1f(this.uniforms["uRadius"], this.radii[i]);
      gl.drawElements(gl.TRIANGLES, this.indexCount, gl.UNSIGNED_INT, 0);
    }
    gl.bindVertexArray(null);
  }
}
